/** Attempt accounting mirrored from the server's answer replies. */

import type { AnswerReply } from "./api";

export class AttemptTracker {
  attempts = 0;
  locked = false;
  solved = false;
  last: AnswerReply | null = null;

  record(reply: AnswerReply): void {
    this.attempts = reply.attempts;
    this.locked = reply.locked;
    this.solved = reply.correct;
    this.last = reply;
  }

  /** Submission is allowed only with playback done and the session live. */
  canSubmit(playbackComplete: boolean): boolean {
    return playbackComplete && !this.locked && !this.solved;
  }
}
