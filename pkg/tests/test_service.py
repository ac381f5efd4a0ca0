from __future__ import annotations

import io
import json
import wave

import numpy as np
import pytest
from fastapi.testclient import TestClient

from swcaptcha.audio import wav_bytes
from swcaptcha.challenge import generate_challenge, n_segments
from swcaptcha.service import create_app

FORBIDDEN_KEYS = {"answer_index", "kind", "kinds", "phi", "prompt", "reference_prompt"}


def walk_keys(obj):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield k
            yield from walk_keys(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from walk_keys(v)


@pytest.fixture(scope="module")
def pool(illusions_converted):
    return [generate_challenge(illusions_converted, 3, rng_seed=s) for s in range(3)]


@pytest.fixture()
def client(pool):
    return TestClient(create_app(pool))


def fetch_everything(client, session_id: str, challenge: dict) -> None:
    client.get(f"/api/v1/audio/{session_id}/reference")
    for opt in challenge["options"]:
        client.get(f"/api/v1/audio/{session_id}/{opt['clip_id']}")


def start(client):
    r = client.get("/api/v1/challenge")
    assert r.status_code == 200
    body = r.json()
    return body["session_id"], body["challenge"]


def answer_key_of(pool, challenge_id):
    return {ch.challenge_id: ch for ch in pool}[challenge_id]


class TestChallengeEndpoint:
    def test_fresh_sessions_and_option_count(self, client):
        s1, c1 = start(client)
        s2, c2 = start(client)
        assert s1 != s2
        assert len(c1["options"]) == 3

    def test_no_secret_fields(self, client):
        _, challenge = start(client)
        assert not (set(walk_keys(challenge)) & FORBIDDEN_KEYS)

    def test_empty_pool_503(self):
        empty = TestClient(create_app([]))
        r = empty.get("/api/v1/challenge")
        assert r.status_code == 503
        assert r.json() == {"error": "no_challenges"}


class TestAudioEndpoint:
    def test_full_fetch_is_stored_wav(self, client, pool):
        sid, ch = start(client)
        truth = answer_key_of(pool, ch["challenge_id"])
        r = client.get(f"/api/v1/audio/{sid}/reference")
        assert r.status_code == 200
        assert r.headers["content-type"] == "audio/wav"
        assert r.content == wav_bytes(truth.reference)

    def test_bytes_identical_across_fetches(self, client):
        sid, ch = start(client)
        clip_id = ch["options"][0]["clip_id"]
        r1 = client.get(f"/api/v1/audio/{sid}/{clip_id}")
        r2 = client.get(f"/api/v1/audio/{sid}/{clip_id}")
        assert r1.content == r2.content

    def test_segment_concatenation_equals_full(self, client):
        sid, ch = start(client)
        clip_id = ch["options"][0]["clip_id"]
        n = ch["options"][0]["n_segments"]
        datas = []
        for i in range(n):
            r = client.get(f"/api/v1/audio/{sid}/{clip_id}", params={"segment": i})
            with wave.open(io.BytesIO(r.content), "rb") as wf:
                datas.append(wf.readframes(wf.getnframes()))
        full = client.get(f"/api/v1/audio/{sid}/{clip_id}").content
        with wave.open(io.BytesIO(full), "rb") as wf:
            assert b"".join(datas) == wf.readframes(wf.getnframes())

    def test_past_end_segment_is_empty_wav(self, client):
        sid, ch = start(client)
        clip_id = ch["options"][0]["clip_id"]
        n = ch["options"][0]["n_segments"]
        r = client.get(f"/api/v1/audio/{sid}/{clip_id}", params={"segment": n + 3})
        assert r.status_code == 200
        with wave.open(io.BytesIO(r.content), "rb") as wf:
            assert wf.getnframes() == 0

    def test_unknown_session_404(self, client):
        assert client.get("/api/v1/audio/deadbeef/reference").status_code == 404

    def test_foreign_clip_403(self, client):
        sid1, ch1 = start(client)
        # find a clip id that belongs to a different challenge
        for _ in range(30):
            sid2, ch2 = start(client)
            if ch2["challenge_id"] != ch1["challenge_id"]:
                foreign = ch2["options"][0]["clip_id"]
                assert client.get(f"/api/v1/audio/{sid1}/{foreign}").status_code == 403
                return
        pytest.skip("random pool never yielded a second distinct challenge")


class TestAnswerEndpoint:
    def test_must_listen_first(self, client):
        sid, ch = start(client)
        r = client.post("/api/v1/answer", json={"session_id": sid, "option_index": 0})
        assert r.status_code == 409
        assert r.json() == {"error": "must_listen_first"}

    def test_partial_listening_insufficient(self, client):
        sid, ch = start(client)
        client.get(f"/api/v1/audio/{sid}/reference")
        client.get(f"/api/v1/audio/{sid}/{ch['options'][0]['clip_id']}")
        r = client.post("/api/v1/answer", json={"session_id": sid, "option_index": 0})
        assert r.status_code == 409

    def test_segment_fetch_marks_only_at_final(self, client):
        sid, ch = start(client)
        client.get(f"/api/v1/audio/{sid}/reference")
        for opt in ch["options"][1:]:
            client.get(f"/api/v1/audio/{sid}/{opt['clip_id']}")
        first = ch["options"][0]
        client.get(f"/api/v1/audio/{sid}/{first['clip_id']}", params={"segment": 0})
        if first["n_segments"] > 1:
            r = client.post("/api/v1/answer", json={"session_id": sid, "option_index": 0})
            assert r.status_code == 409
            client.get(
                f"/api/v1/audio/{sid}/{first['clip_id']}",
                params={"segment": first["n_segments"] - 1},
            )
        r = client.post("/api/v1/answer", json={"session_id": sid, "option_index": 0})
        assert r.status_code == 200

    def test_correct_answer_flow(self, client, pool):
        sid, ch = start(client)
        truth = answer_key_of(pool, ch["challenge_id"])
        fetch_everything(client, sid, ch)
        r = client.post("/api/v1/answer", json={"session_id": sid, "option_index": truth.answer_index})
        assert r.status_code == 200
        assert r.json() == {"correct": True, "attempts": 1, "locked": False}
        again = client.post("/api/v1/answer", json={"session_id": sid, "option_index": truth.answer_index})
        assert again.status_code == 410

    def test_lockout_after_five_wrong(self, client, pool):
        sid, ch = start(client)
        truth = answer_key_of(pool, ch["challenge_id"])
        fetch_everything(client, sid, ch)
        wrong = (truth.answer_index + 1) % 3
        for attempt in range(1, 6):
            r = client.post("/api/v1/answer", json={"session_id": sid, "option_index": wrong})
            assert r.status_code == 200
            body = r.json()
            assert body["correct"] is False
            assert body["attempts"] == attempt
            assert body["locked"] is (attempt == 5)
        sixth = client.post("/api/v1/answer", json={"session_id": sid, "option_index": wrong})
        assert sixth.status_code == 410

    def test_bad_index_400(self, client):
        sid, ch = start(client)
        fetch_everything(client, sid, ch)
        r = client.post("/api/v1/answer", json={"session_id": sid, "option_index": 99})
        assert r.status_code == 400
        r = client.post("/api/v1/answer", json={"session_id": sid, "option_index": "zero"})
        assert r.status_code == 400

    def test_unknown_session_404(self, client):
        r = client.post("/api/v1/answer", json={"session_id": "nope", "option_index": 0})
        assert r.status_code == 404


class TestSecrecyFuzz:
    def test_no_endpoint_leaks_answer_material(self, client, pool):
        sid, ch = start(client)
        fetch_everything(client, sid, ch)
        responses = [
            client.get("/api/v1/challenge").json(),
            client.post("/api/v1/answer", json={"session_id": sid, "option_index": 0}).json(),
        ]
        for body in responses:
            assert not (set(walk_keys(body)) & FORBIDDEN_KEYS)


class TestSessionTtl:
    def test_expired_session_rejected(self, pool):
        clock = {"now": 1000.0}
        app = create_app(pool, session_ttl_s=60.0, now_fn=lambda: clock["now"])
        client = TestClient(app)
        sid, ch = start(client)
        assert client.get(f"/api/v1/audio/{sid}/reference").status_code == 200
        clock["now"] += 61.0
        assert client.get(f"/api/v1/audio/{sid}/reference").status_code == 404


class TestRateLimit:
    def test_fixed_window_limit(self, pool):
        app = create_app(pool, rate_limit_per_min=3)
        client = TestClient(app)
        codes = [client.get("/api/v1/challenge").status_code for _ in range(5)]
        assert codes[:3] == [200, 200, 200]
        assert codes[3] == 429
        assert client.get("/api/v1/challenge").json() == {"error": "rate_limited"}


class TestConcurrentAttempts:
    def test_parallel_posts_count_each_once(self, pool):
        from concurrent.futures import ThreadPoolExecutor

        client = TestClient(create_app(pool))
        sid, ch = start(client)
        fetch_everything(client, sid, ch)
        wrong = 0  # may or may not be correct; we only check attempt accounting

        def post():
            return client.post("/api/v1/answer", json={"session_id": sid, "option_index": wrong})

        with ThreadPoolExecutor(4) as pool_:
            results = list(pool_.map(lambda _: post(), range(4)))
        attempts = sorted(r.json()["attempts"] for r in results if r.status_code == 200)
        assert attempts == sorted(set(attempts)), "each POST must increment exactly once"
