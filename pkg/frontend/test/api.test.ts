import { describe, expect, it } from "vitest";

import {
  ApiClient,
  MustListenFirstError,
  ServiceUnavailableError,
  SessionResolvedError,
  challengeEnvelopeSchema,
  challengeViewSchema,
} from "../src/api";

const goodView = {
  challenge_id: "ch-1",
  instruction: "pick the matching option",
  reference: { clip_id: "reference", n_segments: 2 },
  options: [
    { clip_id: "o1", n_segments: 2 },
    { clip_id: "o2", n_segments: 1 },
    { clip_id: "o3", n_segments: 2 },
  ],
};

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

describe("response shapes", () => {
  it("accepts exactly the documented challenge view", () => {
    expect(challengeViewSchema.parse(goodView)).toEqual(goodView);
  });

  it.each(["answer_index", "kind", "kinds", "phi", "prompt"])(
    "rejects a view smuggling %s",
    (key) => {
      expect(() => challengeViewSchema.parse({ ...goodView, [key]: 1 })).toThrow();
    },
  );

  it("rejects options carrying extra fields", () => {
    const poisoned = {
      ...goodView,
      options: [{ clip_id: "o1", n_segments: 2, kind: "illusion-correct" }],
    };
    expect(() => challengeViewSchema.parse(poisoned)).toThrow();
  });

  it("rejects an envelope with surplus keys", () => {
    expect(() =>
      challengeEnvelopeSchema.parse({
        session_id: "s",
        challenge: goodView,
        answer_index: 0,
      }),
    ).toThrow();
  });
});

describe("ApiClient", () => {
  it("fetches and parses a challenge", async () => {
    const client = new ApiClient("http://svc", async () =>
      jsonResponse({ session_id: "s1", challenge: goodView }),
    );
    const env = await client.fetchChallenge();
    expect(env.session_id).toBe("s1");
    expect(env.challenge.options).toHaveLength(3);
  });

  it("maps 503 to ServiceUnavailableError", async () => {
    const client = new ApiClient("http://svc", async () =>
      jsonResponse({ error: "no_challenges" }, 503),
    );
    await expect(client.fetchChallenge()).rejects.toBeInstanceOf(ServiceUnavailableError);
  });

  it("builds full and segment audio URLs", () => {
    const client = new ApiClient("http://svc", async () => jsonResponse({}));
    expect(client.audioUrl("s1", "o1")).toBe("http://svc/api/v1/audio/s1/o1");
    expect(client.audioUrl("s1", "o1", 2)).toBe("http://svc/api/v1/audio/s1/o1?segment=2");
  });

  it("submits an answer and parses the verdict", async () => {
    const seen: Array<{ input: string; init?: RequestInit }> = [];
    const client = new ApiClient("http://svc", async (input, init) => {
      seen.push({ input, init });
      return jsonResponse({ correct: false, attempts: 1, locked: false });
    });
    const reply = await client.submitAnswer("s1", 2);
    expect(reply).toEqual({ correct: false, attempts: 1, locked: false });
    expect(seen[0]?.input).toBe("http://svc/api/v1/answer");
    expect(JSON.parse(String(seen[0]?.init?.body))).toEqual({
      session_id: "s1",
      option_index: 2,
    });
  });

  it("maps 409 to MustListenFirstError", async () => {
    const client = new ApiClient("http://svc", async () =>
      jsonResponse({ error: "must_listen_first" }, 409),
    );
    await expect(client.submitAnswer("s1", 0)).rejects.toBeInstanceOf(MustListenFirstError);
  });

  it("maps 410 to SessionResolvedError", async () => {
    const client = new ApiClient("http://svc", async () =>
      jsonResponse({ error: "session_resolved" }, 410),
    );
    await expect(client.submitAnswer("s1", 0)).rejects.toBeInstanceOf(SessionResolvedError);
  });

  it("rejects a verdict with answer-shaped extras", async () => {
    const client = new ApiClient("http://svc", async () =>
      jsonResponse({ correct: true, attempts: 1, locked: false, answer_index: 2 }),
    );
    await expect(client.submitAnswer("s1", 0)).rejects.toThrow();
  });
});
