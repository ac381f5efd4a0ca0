/**
 * Schema-typed bindings for the challenge service.
 *
 * Every response is parsed through a strict schema: any field the server
 * never promised (and in particular anything answer-shaped) makes the
 * parse throw rather than silently flowing into client state.
 */

import { z } from "zod";

export const clipRefSchema = z
  .object({
    clip_id: z.string().min(1),
    n_segments: z.number().int().positive(),
  })
  .strict();

export const challengeViewSchema = z
  .object({
    challenge_id: z.string().min(1),
    instruction: z.string(),
    reference: clipRefSchema,
    options: z.array(clipRefSchema).min(2),
  })
  .strict();

export const challengeEnvelopeSchema = z
  .object({
    session_id: z.string().min(1),
    challenge: challengeViewSchema,
  })
  .strict();

export const answerReplySchema = z
  .object({
    correct: z.boolean(),
    attempts: z.number().int().nonnegative(),
    locked: z.boolean(),
  })
  .strict();

export type ClipRef = z.infer<typeof clipRefSchema>;
export type ChallengeView = z.infer<typeof challengeViewSchema>;
export type ChallengeEnvelope = z.infer<typeof challengeEnvelopeSchema>;
export type AnswerReply = z.infer<typeof answerReplySchema>;

export class ServiceUnavailableError extends Error {
  constructor() {
    super("no challenges available right now");
  }
}

export class MustListenFirstError extends Error {
  constructor() {
    super("the server requires all audio to be played before answering");
  }
}

export class SessionResolvedError extends Error {
  constructor() {
    super("this session is already resolved");
  }
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(`service error ${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async fetchChallenge(): Promise<ChallengeEnvelope> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1/challenge`);
    if (resp.status === 503) throw new ServiceUnavailableError();
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return challengeEnvelopeSchema.parse(await resp.json());
  }

  audioUrl(sessionId: string, clipId: string, segment?: number): string {
    const base = `${this.baseUrl}/api/v1/audio/${sessionId}/${clipId}`;
    return segment === undefined ? base : `${base}?segment=${segment}`;
  }

  async submitAnswer(sessionId: string, optionIndex: number): Promise<AnswerReply> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1/answer`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ session_id: sessionId, option_index: optionIndex }),
    });
    if (resp.status === 409) throw new MustListenFirstError();
    if (resp.status === 410) throw new SessionResolvedError();
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return answerReplySchema.parse(await resp.json());
  }
}
