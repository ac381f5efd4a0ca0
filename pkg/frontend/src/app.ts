/**
 * Single-page challenge client.
 *
 * Flow: fetch a challenge, render one player for the clean reference and
 * one per option (full playback plus per-segment buttons), keep the
 * submit control disabled until every clip reports completed playback,
 * then submit the selected option and show the verdict. One audio
 * element is shared, so starting any clip stops whatever else played.
 */

import {
  ApiClient,
  ChallengeEnvelope,
  MustListenFirstError,
  ServiceUnavailableError,
  SessionResolvedError,
} from "./api";
import { AttemptTracker } from "./attempts";
import { ChallengeProgress } from "./playback";
import { apiBase } from "./config";

const TRAINING_BLURB =
  "How it works: you will first hear a short natural voice recording. " +
  "Each answer option plays the same kind of phrase re-drawn as a few " +
  "whistling tones (sine-wave speech). It sounds strange at first; after " +
  "hearing the natural reference, one option will pop out as saying the " +
  "same words. Listen to everything, then pick that option.";

interface PlayerRow {
  clipId: string;
  stateBadge: HTMLElement;
  buttons: HTMLButtonElement[];
}

export class ChallengeApp {
  private readonly api: ApiClient;
  private readonly root: HTMLElement;
  private readonly audio: HTMLAudioElement;
  private session: ChallengeEnvelope | null = null;
  private progress: ChallengeProgress | null = null;
  private attempts = new AttemptTracker();
  private rows: PlayerRow[] = [];
  private submitButton!: HTMLButtonElement;
  private banner!: HTMLElement;
  private optionsForm!: HTMLFormElement;
  private currentClip: { clipId: string; segment?: number } | null = null;

  constructor(root: HTMLElement, api?: ApiClient, audio?: HTMLAudioElement) {
    this.root = root;
    this.api = api ?? new ApiClient(apiBase());
    this.audio = audio ?? new Audio();
    this.audio.preload = "auto";
    this.audio.addEventListener("ended", () => this.onPlaybackEnded());
    this.audio.addEventListener("error", () => this.onPlaybackInterrupted());
  }

  async start(): Promise<void> {
    this.renderShell("Loading challenge…");
    try {
      this.session = await this.api.fetchChallenge();
    } catch (err) {
      if (err instanceof ServiceUnavailableError) {
        this.renderRetry("No challenges are available right now.");
        return;
      }
      this.renderRetry("Could not reach the challenge service.");
      return;
    }
    const ch = this.session.challenge;
    this.progress = new ChallengeProgress([
      { clipId: "reference", nSegments: ch.reference.n_segments },
      ...ch.options.map((o) => ({ clipId: o.clip_id, nSegments: o.n_segments })),
    ]);
    this.attempts = new AttemptTracker();
    this.renderChallenge();
  }

  // --- rendering ------------------------------------------------------------

  private renderShell(message: string): void {
    this.root.replaceChildren();
    const heading = document.createElement("h1");
    heading.textContent = "Audio check";
    const note = document.createElement("p");
    note.textContent = message;
    this.root.append(heading, note);
  }

  private renderRetry(message: string): void {
    this.renderShell(message);
    const retry = document.createElement("button");
    retry.type = "button";
    retry.textContent = "Try again";
    retry.addEventListener("click", () => void this.start());
    this.root.append(retry);
  }

  private renderChallenge(): void {
    if (!this.session) return;
    const ch = this.session.challenge;
    this.root.replaceChildren();
    this.rows = [];

    const heading = document.createElement("h1");
    heading.textContent = "Audio check";

    const training = document.createElement("p");
    training.className = "training";
    training.textContent = TRAINING_BLURB;

    const instruction = document.createElement("p");
    instruction.className = "instruction";
    instruction.textContent = ch.instruction;

    this.banner = document.createElement("p");
    this.banner.className = "banner";
    this.banner.setAttribute("role", "status");
    this.banner.setAttribute("aria-live", "polite");

    const refSection = document.createElement("section");
    refSection.append(
      this.heading2("Reference recording"),
      this.playerRow("reference", ch.reference.n_segments, "reference recording"),
    );

    this.optionsForm = document.createElement("form");
    this.optionsForm.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submit();
    });
    const optSection = document.createElement("section");
    optSection.append(this.heading2("Options"));
    ch.options.forEach((opt, index) => {
      const fieldset = document.createElement("fieldset");
      const legend = document.createElement("legend");
      legend.textContent = `Option ${index + 1}`;
      const choice = document.createElement("input");
      choice.type = "radio";
      choice.name = "option";
      choice.value = String(index);
      choice.id = `choice-${index}`;
      choice.addEventListener("change", () => this.refreshControls());
      const label = document.createElement("label");
      label.htmlFor = choice.id;
      label.textContent = `Choose option ${index + 1}`;
      fieldset.append(
        legend,
        this.playerRow(opt.clip_id, opt.n_segments, `option ${index + 1}`),
        choice,
        label,
      );
      this.optionsForm.append(fieldset);
    });

    this.submitButton = document.createElement("button");
    this.submitButton.type = "submit";
    this.submitButton.textContent = "Submit answer";
    this.submitButton.disabled = true;
    this.optionsForm.append(this.submitButton);
    optSection.append(this.optionsForm);

    this.root.append(heading, training, instruction, this.banner, refSection, optSection);
    this.refreshControls();
  }

  private heading2(text: string): HTMLElement {
    const h = document.createElement("h2");
    h.textContent = text;
    return h;
  }

  private playerRow(clipId: string, nSegments: number, spokenName: string): HTMLElement {
    const row = document.createElement("div");
    row.className = "player";
    const buttons: HTMLButtonElement[] = [];

    const full = document.createElement("button");
    full.type = "button";
    full.textContent = "Play";
    full.setAttribute("aria-label", `Play the whole ${spokenName}`);
    full.addEventListener("click", () => this.play(clipId));
    buttons.push(full);
    row.append(full);

    if (nSegments > 1) {
      for (let i = 0; i < nSegments; i++) {
        const seg = document.createElement("button");
        seg.type = "button";
        seg.textContent = `Part ${i + 1}`;
        seg.setAttribute("aria-label", `Play part ${i + 1} of ${nSegments} of the ${spokenName}`);
        seg.addEventListener("click", () => this.play(clipId, i));
        buttons.push(seg);
        row.append(seg);
      }
    }

    const badge = document.createElement("span");
    badge.className = "state";
    badge.dataset.clip = clipId;
    row.append(badge);
    this.rows.push({ clipId, stateBadge: badge, buttons });
    return row;
  }

  // --- playback -------------------------------------------------------------

  private play(clipId: string, segment?: number): void {
    if (!this.session || !this.progress) return;
    this.audio.pause();
    this.currentClip = { clipId, segment };
    this.progress.clip(clipId).noteStarted();
    this.audio.src = this.api.audioUrl(this.session.session_id, clipId, segment);
    const started = this.audio.play() as Promise<void> | undefined;
    if (started) void started.catch(() => this.onPlaybackInterrupted());
    this.refreshControls();
  }

  private onPlaybackEnded(): void {
    if (!this.progress || !this.currentClip) return;
    const { clipId, segment } = this.currentClip;
    const clip = this.progress.clip(clipId);
    if (segment === undefined) {
      clip.noteFullFinished();
    } else {
      clip.noteSegmentFinished(segment);
    }
    this.currentClip = null;
    this.refreshControls();
  }

  private onPlaybackInterrupted(): void {
    if (!this.progress || !this.currentClip) return;
    this.progress.clip(this.currentClip.clipId).noteInterrupted();
    this.currentClip = null;
    this.refreshControls();
  }

  // --- submission -----------------------------------------------------------

  private selectedIndex(): number | null {
    const chosen = this.optionsForm.querySelector<HTMLInputElement>(
      "input[name=option]:checked",
    );
    return chosen ? Number(chosen.value) : null;
  }

  private async submit(): Promise<void> {
    if (!this.session || !this.progress) return;
    const index = this.selectedIndex();
    if (index === null || !this.attempts.canSubmit(this.progress.allCompleted())) return;
    try {
      const reply = await this.api.submitAnswer(this.session.session_id, index);
      this.attempts.record(reply);
      if (reply.correct) {
        this.setBanner(`Correct, solved on attempt ${reply.attempts}.`, "ok");
      } else if (reply.locked) {
        this.setBanner("Too many attempts; this challenge is locked.", "bad");
        this.offerFreshChallenge();
      } else {
        this.setBanner(`Not that one (attempt ${reply.attempts}). Listen again and retry.`, "bad");
      }
    } catch (err) {
      if (err instanceof MustListenFirstError) {
        // client and server disagree about what was heard: start over
        this.progress.reset();
        this.setBanner("The server wants every clip played in full first; progress was reset.", "bad");
      } else if (err instanceof SessionResolvedError) {
        this.setBanner("This challenge is already finished.", "bad");
        this.offerFreshChallenge();
      } else {
        this.setBanner("Network problem while submitting; try again.", "bad");
      }
    }
    this.refreshControls();
  }

  private offerFreshChallenge(): void {
    const again = document.createElement("button");
    again.type = "button";
    again.textContent = "Get a new challenge";
    again.addEventListener("click", () => void this.start());
    this.banner.append(" ", again);
  }

  private setBanner(text: string, tone: "ok" | "bad"): void {
    this.banner.textContent = text;
    this.banner.dataset.tone = tone;
  }

  // --- control state ----------------------------------------------------------

  private refreshControls(): void {
    if (!this.progress) return;
    for (const row of this.rows) {
      const state = this.progress.clip(row.clipId).state;
      row.stateBadge.textContent = state;
    }
    const gateOpen = this.progress.allCompleted();
    const chosen = this.selectedIndex() !== null;
    this.submitButton.disabled = !(gateOpen && chosen && this.attempts.canSubmit(gateOpen));
    this.submitButton.title = gateOpen
      ? ""
      : "Play the reference and every option to the end first";
  }
}

const mount = document.getElementById("app");
if (mount) {
  void new ChallengeApp(mount).start();
}
