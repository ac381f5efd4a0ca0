// @vitest-environment jsdom
import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { ChallengeApp } from "../src/app";

const view = {
  challenge_id: "ch-1",
  instruction: "pick the matching option",
  reference: { clip_id: "reference", n_segments: 2 },
  options: [
    { clip_id: "oa", n_segments: 2 },
    { clip_id: "ob", n_segments: 1 },
    { clip_id: "oc", n_segments: 2 },
  ],
};

interface Scripted {
  verdicts: Array<{ correct: boolean; attempts: number; locked: boolean } | { status: number }>;
  answersSeen: number[];
}

function makeClient(script: Scripted, challengeStatus = 200): ApiClient {
  return new ApiClient("http://svc", async (input, init) => {
    if (input.endsWith("/api/v1/challenge")) {
      if (challengeStatus !== 200) {
        return new Response(JSON.stringify({ error: "no_challenges" }), { status: 503 });
      }
      return new Response(JSON.stringify({ session_id: "s1", challenge: view }), { status: 200 });
    }
    if (input.endsWith("/api/v1/answer")) {
      const body = JSON.parse(String(init?.body)) as { option_index: number };
      script.answersSeen.push(body.option_index);
      const next = script.verdicts.shift();
      if (!next) throw new Error("unscripted answer call");
      if ("status" in next) {
        return new Response(JSON.stringify({ error: "x" }), { status: next.status });
      }
      return new Response(JSON.stringify(next), { status: 200 });
    }
    throw new Error(`unexpected request: ${input}`);
  });
}

function finishCurrentClip(audio: HTMLAudioElement): void {
  audio.dispatchEvent(new Event("ended"));
}

function submitButton(root: HTMLElement): HTMLButtonElement {
  const btn = root.querySelector<HTMLButtonElement>("button[type=submit]");
  if (!btn) throw new Error("no submit button");
  return btn;
}

function playButtons(root: HTMLElement, label: string): HTMLButtonElement[] {
  return [...root.querySelectorAll<HTMLButtonElement>("button")].filter((b) =>
    (b.getAttribute("aria-label") ?? "").includes(label),
  );
}

async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}

describe("ChallengeApp", () => {
  let root: HTMLElement;
  let audio: HTMLAudioElement;
  let script: Scripted;

  beforeEach(() => {
    document.body.innerHTML = "<main id='root'></main>";
    root = document.getElementById("root") as HTMLElement;
    audio = document.createElement("audio");
    script = { verdicts: [], answersSeen: [] };
  });

  async function startApp(status = 200): Promise<ChallengeApp> {
    const app = new ChallengeApp(root, makeClient(script, status), audio);
    await app.start();
    return app;
  }

  it("renders one reference player plus one player per option", async () => {
    await startApp();
    expect(playButtons(root, "reference recording")).not.toHaveLength(0);
    expect(playButtons(root, "option 1")).not.toHaveLength(0);
    expect(playButtons(root, "option 3")).not.toHaveLength(0);
    expect(root.querySelectorAll("input[type=radio]")).toHaveLength(3);
  });

  it("starts with the submit control disabled", async () => {
    await startApp();
    expect(submitButton(root).disabled).toBe(true);
  });

  it("shows a retry state when the service has no challenges", async () => {
    await startApp(503);
    expect(root.textContent).toContain("No challenges are available");
    const retry = [...root.querySelectorAll("button")].find((b) => b.textContent === "Try again");
    expect(retry).toBeTruthy();
  });

  it("segment playback hits ?segment=i and completes only on the final part", async () => {
    await startApp();
    const refParts = playButtons(root, "of the reference recording");
    expect(refParts).toHaveLength(2);

    refParts[0]!.click();
    expect(audio.src).toContain("/api/v1/audio/s1/reference?segment=0");
    finishCurrentClip(audio);
    expect(root.querySelector("[data-clip=reference]")?.textContent).toBe("partial");

    refParts[1]!.click();
    expect(audio.src).toContain("/api/v1/audio/s1/reference?segment=1");
    finishCurrentClip(audio);
    expect(root.querySelector("[data-clip=reference]")?.textContent).toBe("completed");
  });

  it("enables submit only after reference and every option completed", async () => {
    await startApp();
    (root.querySelector("#choice-0") as HTMLInputElement).click();

    for (const clip of ["reference recording", "option 1", "option 2"]) {
      playButtons(root, `whole ${clip}`)[0]!.click();
      finishCurrentClip(audio);
      expect(submitButton(root).disabled).toBe(true);
    }
    playButtons(root, "whole option 3")[0]!.click();
    finishCurrentClip(audio);
    expect(submitButton(root).disabled).toBe(false);
  });

  it("interrupted playback stays partial and keeps the gate closed", async () => {
    await startApp();
    (root.querySelector("#choice-0") as HTMLInputElement).click();
    for (const clip of ["reference recording", "option 1", "option 2"]) {
      playButtons(root, `whole ${clip}`)[0]!.click();
      finishCurrentClip(audio);
    }
    playButtons(root, "whole option 3")[0]!.click();
    audio.dispatchEvent(new Event("error"));
    expect(root.querySelectorAll(".state")[3]?.textContent).toBe("partial");
    expect(submitButton(root).disabled).toBe(true);
  });

  async function listenToEverything(): Promise<void> {
    for (const clip of ["reference recording", "option 1", "option 2", "option 3"]) {
      playButtons(root, `whole ${clip}`)[0]!.click();
      finishCurrentClip(audio);
    }
  }

  it("renders wrong and right verdicts per the service contract", async () => {
    script.verdicts = [
      { correct: false, attempts: 1, locked: false },
      { correct: true, attempts: 2, locked: false },
    ];
    await startApp();
    await listenToEverything();
    (root.querySelector("#choice-1") as HTMLInputElement).click();

    submitButton(root).click();
    await flush();
    expect(root.querySelector(".banner")?.textContent).toContain("Not that one (attempt 1)");
    expect(submitButton(root).disabled).toBe(false); // retry allowed until locked

    submitButton(root).click();
    await flush();
    expect(root.querySelector(".banner")?.textContent).toContain("Correct, solved on attempt 2");
    expect(submitButton(root).disabled).toBe(true);
    expect(script.answersSeen).toEqual([1, 1]);
  });

  it("renders the lockout state and offers a fresh challenge", async () => {
    script.verdicts = [{ correct: false, attempts: 5, locked: true }];
    await startApp();
    await listenToEverything();
    (root.querySelector("#choice-2") as HTMLInputElement).click();

    submitButton(root).click();
    await flush();
    expect(root.querySelector(".banner")?.textContent).toContain("locked");
    expect(submitButton(root).disabled).toBe(true);
    const fresh = [...root.querySelectorAll("button")].find(
      (b) => b.textContent === "Get a new challenge",
    );
    expect(fresh).toBeTruthy();
  });

  it("a server 409 resets playback tracking from scratch", async () => {
    script.verdicts = [{ status: 409 }];
    await startApp();
    await listenToEverything();
    (root.querySelector("#choice-0") as HTMLInputElement).click();

    submitButton(root).click();
    await flush();
    expect(root.querySelector(".banner")?.textContent).toContain("progress was reset");
    expect(root.querySelector("[data-clip=reference]")?.textContent).toBe("unplayed");
    expect(submitButton(root).disabled).toBe(true);
  });
});
