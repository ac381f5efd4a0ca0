"""HTTP challenge service.

Serves client-safe challenge manifests and audio (full or segment-wise),
tracks which clips each session has streamed, refuses answers until
everything was listened to, and locks sessions after too many attempts.
The answer key never appears in any response body.
"""

from __future__ import annotations

import random
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from .audio import wav_bytes
from .challenge import (
    Challenge,
    InvalidAnswerError,
    challenge_view,
    clip_segment,
    load_challenge,
    n_segments,
    verify_answer,
)

DEFAULT_MAX_ATTEMPTS = 5
DEFAULT_SESSION_TTL_S = 900.0


@dataclass
class Session:
    session_id: str
    challenge_id: str
    created_at: float
    fetched: set[str] = field(default_factory=set)
    attempts: int = 0
    resolved: bool = False
    locked: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


class _RateLimiter:
    """Fixed one-minute window per client address."""

    def __init__(self, limit_per_min: int, now_fn) -> None:
        self.limit = limit_per_min
        self.now = now_fn
        self._windows: dict[str, tuple[int, int]] = {}
        self._lock = threading.Lock()

    def allow(self, key: str) -> bool:
        if self.limit <= 0:
            return True
        window = int(self.now() // 60)
        with self._lock:
            w, count = self._windows.get(key, (window, 0))
            if w != window:
                count = 0
            count += 1
            self._windows[key] = (window, count)
            return count <= self.limit


def load_pool(pool_dir) -> list[Challenge]:
    root = Path(pool_dir)
    bundles = sorted(p for p in root.iterdir() if (p / "manifest.json").exists())
    return [load_challenge(p) for p in bundles]


def create_app(
    pool: list[Challenge],
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    session_ttl_s: float = DEFAULT_SESSION_TTL_S,
    allow_origin: str | None = None,
    rate_limit_per_min: int = 0,
    now_fn=time.monotonic,
    pick_rng: random.Random | None = None,
) -> FastAPI:
    app = FastAPI(title="sine-wave audio captcha service")
    challenges = {ch.challenge_id: ch for ch in pool}
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    rng = pick_rng or random.Random()
    limiter = _RateLimiter(rate_limit_per_min, now_fn)

    if allow_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[allow_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    def _client_key(request: Request) -> str:
        return request.client.host if request.client else "unknown"

    @app.middleware("http")
    async def _rate_limit(request: Request, call_next):
        if not limiter.allow(_client_key(request)):
            return JSONResponse({"error": "rate_limited"}, status_code=429)
        return await call_next(request)

    def _get_session(session_id: str) -> Session | None:
        with sessions_lock:
            sess = sessions.get(session_id)
            if sess is None:
                return None
            if now_fn() - sess.created_at > session_ttl_s:
                del sessions[session_id]
                return None
            return sess

    def _required_clips(ch: Challenge) -> set[str]:
        return {"reference"} | {o.option_id for o in ch.options}

    @app.get("/api/v1/challenge")
    def get_challenge():
        if not challenges:
            return JSONResponse({"error": "no_challenges"}, status_code=503)
        ch = rng.choice(list(challenges.values()))
        sess = Session(
            session_id=uuid.uuid4().hex,
            challenge_id=ch.challenge_id,
            created_at=now_fn(),
        )
        with sessions_lock:
            sessions[sess.session_id] = sess
        return {"session_id": sess.session_id, "challenge": challenge_view(ch)}

    @app.get("/api/v1/audio/{session_id}/{clip_id}")
    def get_audio(session_id: str, clip_id: str, segment: int | None = None):
        sess = _get_session(session_id)
        if sess is None:
            return JSONResponse({"error": "unknown_session"}, status_code=404)
        ch = challenges[sess.challenge_id]
        if clip_id == "reference":
            clip = ch.reference
            seg_len = ch.options[0].segment_length_s if ch.options else 1.0
        else:
            match = [o for o in ch.options if o.option_id == clip_id]
            if not match:
                return JSONResponse({"error": "clip_not_in_session"}, status_code=403)
            clip = match[0].clip
            seg_len = match[0].segment_length_s
        index = segment
        if index is None:
            with sess.lock:
                sess.fetched.add(clip_id)
            return Response(content=wav_bytes(clip), media_type="audio/wav")
        if index < 0:
            return JSONResponse({"error": "bad_segment"}, status_code=400)
        total = n_segments(clip, seg_len)
        piece = clip_segment(clip, index, seg_len)
        if index == total - 1:
            with sess.lock:
                sess.fetched.add(clip_id)
        return Response(content=wav_bytes(piece), media_type="audio/wav")

    @app.post("/api/v1/answer")
    async def post_answer(request: Request):
        body = await request.json()
        session_id = body.get("session_id")
        sess = _get_session(str(session_id)) if session_id else None
        if sess is None:
            return JSONResponse({"error": "unknown_session"}, status_code=404)
        ch = challenges[sess.challenge_id]
        with sess.lock:
            if sess.resolved:
                return JSONResponse({"error": "session_resolved"}, status_code=410)
            if sess.fetched < _required_clips(ch):
                return JSONResponse({"error": "must_listen_first"}, status_code=409)
            option_index = body.get("option_index")
            try:
                correct = verify_answer(ch, option_index)
            except InvalidAnswerError as exc:
                return JSONResponse({"error": "bad_option_index", "detail": str(exc)}, status_code=400)
            sess.attempts += 1
            if correct:
                sess.resolved = True
            elif sess.attempts >= max_attempts:
                sess.resolved = True
                sess.locked = True
            return {"correct": correct, "attempts": sess.attempts, "locked": sess.locked}

    return app


def serve(
    pool_dir,
    port: int = 8000,
    host: str = "127.0.0.1",
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    session_ttl_s: float = DEFAULT_SESSION_TTL_S,
    allow_origin: str | None = None,
    rate_limit_per_min: int = 60,
) -> None:
    import uvicorn

    app = create_app(
        load_pool(pool_dir),
        max_attempts=max_attempts,
        session_ttl_s=session_ttl_s,
        allow_origin=allow_origin,
        rate_limit_per_min=rate_limit_per_min,
    )
    uvicorn.run(app, host=host, port=port)
