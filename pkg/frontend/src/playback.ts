/**
 * Per-clip playback completion tracking.
 *
 * A clip is completed once its full stream finished or its final segment
 * finished; anything interrupted mid-stream stays partial. Submission is
 * gated on the reference and every option being completed (the server
 * enforces the same rule authoritatively).
 */

export type PlaybackState = "unplayed" | "partial" | "completed";

export class ClipProgress {
  state: PlaybackState = "unplayed";

  constructor(readonly clipId: string, readonly nSegments: number) {}

  noteStarted(): void {
    if (this.state === "unplayed") this.state = "partial";
  }

  noteFullFinished(): void {
    this.state = "completed";
  }

  noteSegmentFinished(segmentIndex: number): void {
    if (segmentIndex === this.nSegments - 1) {
      this.state = "completed";
    } else if (this.state !== "completed") {
      this.state = "partial";
    }
  }

  noteInterrupted(): void {
    if (this.state !== "completed") this.state = "partial";
  }
}

export class ChallengeProgress {
  private readonly clips = new Map<string, ClipProgress>();

  constructor(entries: ReadonlyArray<{ clipId: string; nSegments: number }>) {
    for (const { clipId, nSegments } of entries) {
      this.clips.set(clipId, new ClipProgress(clipId, nSegments));
    }
  }

  clip(clipId: string): ClipProgress {
    const found = this.clips.get(clipId);
    if (!found) throw new Error(`unknown clip: ${clipId}`);
    return found;
  }

  allCompleted(): boolean {
    for (const clip of this.clips.values()) {
      if (clip.state !== "completed") return false;
    }
    return true;
  }

  /** Forget everything; used when the server disagrees about our gating. */
  reset(): void {
    for (const clip of this.clips.values()) {
      clip.state = "unplayed";
    }
  }
}
