"""Automated solvers and the adapter protocol for external model backends.

Built-ins: an RMS-envelope matcher (the strongest cheap amplitude
heuristic we could define, so defeating it means something) and a seeded
random guesser. External large-audio-model or transcribe-then-reason
pipelines attach through adapters speaking a small JSON protocol over
HTTP or a subprocess pipe; see docs/adapter.md for the wire format.
"""

from __future__ import annotations

import base64
import json
import re
import subprocess
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .audio import AudioClip, rms_envelope, wav_bytes
from .challenge import Challenge
from .seeding import derive_seed

RMS_FRAME = 400
RMS_HOP = 160
RMS_GRID_POINTS = 64


@dataclass(frozen=True)
class ChallengeAudio:
    """The attacker's view: audio bytes and instruction, no answer key."""

    challenge_id: str
    instruction: str
    reference: AudioClip
    options: list[AudioClip]
    option_ids: list[str]

    @property
    def n_options(self) -> int:
        return len(self.options)


def attacker_view(challenge: Challenge) -> ChallengeAudio:
    return ChallengeAudio(
        challenge_id=challenge.challenge_id,
        instruction=challenge.instruction,
        reference=challenge.reference,
        options=[o.clip for o in challenge.options],
        option_ids=[o.option_id for o in challenge.options],
    )


@dataclass(frozen=True)
class SolverVerdict:
    challenge_id: str
    chosen_index: int | None
    raw_response: str
    latency_ms: float = 0.0

    @property
    def abstained(self) -> bool:
        return self.chosen_index is None


class PromptMode(str, Enum):
    ZERO_SHOT = "zero-shot"
    CHAIN_OF_THOUGHT = "chain-of-thought"
    PROMPT_GUIDED = "prompt-guided"
    NON_PROMPT_GUIDED = "non-prompt-guided"


END_TO_END_MODES = (PromptMode.ZERO_SHOT, PromptMode.CHAIN_OF_THOUGHT)
TWO_STAGE_MODES = (PromptMode.PROMPT_GUIDED, PromptMode.NON_PROMPT_GUIDED)

PROMPT_TEMPLATES = {
    "solve-zero-shot": (
        "You hear a clean reference recording followed by the candidate options. "
        "Reply with the option whose spoken content matches the reference, "
        "for example 'Option 2'."
    ),
    "solve-chain-of-thought": (
        "You hear a clean reference recording followed by the candidate options. "
        "Think step by step: describe what the reference says, then what each "
        "option says, then finish with your answer as 'Option N'."
    ),
    "transcribe-plain": "Transcribe the spoken content of this audio exactly.",
    "transcribe-hinted": (
        "This audio contains a short English phrase of digit words rendered "
        "with heavy distortion. Transcribe the words as best you can."
    ),
    "reason-from-transcripts": (
        "Given the reference transcript and one transcript per option, reply "
        "with the option whose content matches the reference, e.g. 'Option 2'."
    ),
}


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    if float(a.std()) == 0.0 or float(b.std()) == 0.0:
        return -1.0
    return float(np.corrcoef(a, b)[0, 1])


def _env_on_grid(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Sample an envelope sequence on a fixed index grid; silence past its end."""
    idx = np.arange(len(values), dtype=float)
    return np.interp(grid, idx, values, left=float(values[0]), right=0.0)


class RmsEnvelopeSolver:
    """Picks the option whose RMS envelope best matches the reference's.

    Envelopes use frame 400 / hop 160; every envelope is read on a common
    64-point grid spanning the reference's time extent (an option beyond
    its own end reads as silence), and the verdict is the Pearson-argmax.
    Matching on the reference's absolute time base is what makes the
    matcher sensitive to time-base tampering while staying gain-invariant.
    """

    name = "rms"
    mode = None

    def correlations(self, view: ChallengeAudio) -> list[float]:
        ref_env = rms_envelope(view.reference, RMS_FRAME, RMS_HOP).values
        grid = np.linspace(0.0, len(ref_env) - 1.0, RMS_GRID_POINTS)
        ref64 = _env_on_grid(ref_env, grid)
        scores: list[float] = []
        for clip in view.options:
            if len(clip) < RMS_FRAME:
                scores.append(-1.0)
                continue
            env = rms_envelope(clip, RMS_FRAME, RMS_HOP).values
            scores.append(_pearson(ref64, _env_on_grid(env, grid)))
        return scores

    def solve(self, view: ChallengeAudio) -> SolverVerdict:
        start = time.monotonic()
        scores = self.correlations(view)
        chosen = int(np.argmax(scores))
        return SolverVerdict(
            challenge_id=view.challenge_id,
            chosen_index=chosen,
            raw_response=json.dumps({"correlations": [round(s, 6) for s in scores]}),
            latency_ms=(time.monotonic() - start) * 1000.0,
        )


class RandomSolver:
    """Uniform guess, deterministic per (seed, challenge_id)."""

    name = "random"
    mode = None

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def solve(self, view: ChallengeAudio) -> SolverVerdict:
        rng = np.random.default_rng(derive_seed(self.seed, "random", view.challenge_id))
        chosen = int(rng.integers(view.n_options))
        return SolverVerdict(
            challenge_id=view.challenge_id,
            chosen_index=chosen,
            raw_response=f"random:{chosen}",
        )


# --- free-text answer extraction ----------------------------------------------


def extract_choice(text: str, n_options: int) -> int | None:
    """Map a model's free-text reply onto a 0-based option index.

    Normalizes to lowercase without punctuation, then scans for 'option N',
    bare option letters, and bare digits; the last match in the text wins
    (models that reason out loud put the answer at the end). Returns None
    when nothing usable is found, which callers count as an abstention.
    """
    normalized = re.sub(r"[^a-z0-9\s]+", " ", text.lower())
    letters = "abcdefgh"[:n_options]
    found: list[tuple[int, int]] = []
    for m in re.finditer(r"\boption\s+(\d+)\b", normalized):
        n = int(m.group(1))
        if 1 <= n <= n_options:
            found.append((m.start(), n - 1))
    for m in re.finditer(r"\b([a-h])\b", normalized):
        pos = letters.find(m.group(1))
        if pos >= 0:
            found.append((m.start(), pos))
    for m in re.finditer(r"\b(\d)\b", normalized):
        n = int(m.group(1))
        if 1 <= n <= n_options:
            found.append((m.start(), n - 1))
    if not found:
        return None
    return max(found)[1]


# --- external adapters ----------------------------------------------------------


class AdapterTransportError(RuntimeError):
    """The adapter endpoint could not be reached or returned garbage."""


class HttpAdapter:
    """JSON-over-HTTP adapter: POST one request object, read {'text': ...}."""

    def __init__(self, url: str, timeout_s: float = 30.0) -> None:
        self.url = url
        self.timeout_s = timeout_s

    def request(self, payload: dict) -> str:
        import httpx

        try:
            resp = httpx.post(self.url, json=payload, timeout=self.timeout_s)
            resp.raise_for_status()
            return str(resp.json()["text"])
        except Exception as exc:
            raise AdapterTransportError(str(exc)) from exc


class SubprocessAdapter:
    """Subprocess-over-stdio adapter: JSON request in, {'text': ...} out."""

    def __init__(self, command: list[str], timeout_s: float = 60.0) -> None:
        self.command = command
        self.timeout_s = timeout_s

    def request(self, payload: dict) -> str:
        try:
            proc = subprocess.run(
                self.command,
                input=json.dumps(payload).encode("utf-8"),
                capture_output=True,
                timeout=self.timeout_s,
                check=True,
            )
            return str(json.loads(proc.stdout.decode("utf-8"))["text"])
        except Exception as exc:
            raise AdapterTransportError(str(exc)) from exc


def _b64(clip: AudioClip) -> str:
    return base64.b64encode(wav_bytes(clip)).decode("ascii")


class ExternalSolver:
    """Drives an end-to-end or transcribe-then-reason backend via an adapter.

    family 'end-to-end' sends reference plus options in one request;
    family 'two-stage' transcribes each clip separately (the prompt-guided
    mode prepends a task hint) and sends the transcripts to a reasoning
    request. Transport failures retry, then count as abstentions.
    """

    def __init__(
        self,
        name: str,
        adapter,
        family: str = "end-to-end",
        mode: PromptMode = PromptMode.ZERO_SHOT,
        max_retries: int = 2,
    ) -> None:
        if family == "end-to-end":
            legal = END_TO_END_MODES
        elif family == "two-stage":
            legal = TWO_STAGE_MODES
        else:
            raise ValueError(f"unknown solver family: {family}")
        if mode not in legal:
            raise ValueError(f"mode {mode.value} is not legal for {family} solvers")
        self.name = name
        self.adapter = adapter
        self.family = family
        self.mode = mode.value
        self._mode_enum = mode
        self.max_retries = max_retries

    def _request(self, payload: dict) -> str:
        last: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                return self.adapter.request(payload)
            except AdapterTransportError as exc:
                last = exc
        raise last  # type: ignore[misc]

    def _solve_end_to_end(self, view: ChallengeAudio) -> str:
        template_id = f"solve-{self._mode_enum.value}"
        payload = {
            "task": "solve",
            "challenge_id": view.challenge_id,
            "prompt_template_id": template_id,
            "prompt": PROMPT_TEMPLATES[template_id],
            "instruction": view.instruction,
            "reference_wav_b64": _b64(view.reference),
            "options_wav_b64": [_b64(c) for c in view.options],
        }
        return self._request(payload)

    def _transcribe(self, view: ChallengeAudio, clip_id: str, clip: AudioClip) -> str:
        hinted = self._mode_enum is PromptMode.PROMPT_GUIDED
        template_id = "transcribe-hinted" if hinted else "transcribe-plain"
        payload = {
            "task": "transcribe",
            "challenge_id": view.challenge_id,
            "clip_id": clip_id,
            "prompt_template_id": template_id,
            "prompt": PROMPT_TEMPLATES[template_id],
            "audio_wav_b64": _b64(clip),
        }
        return self._request(payload)

    def _solve_two_stage(self, view: ChallengeAudio) -> str:
        ref_text = self._transcribe(view, "reference", view.reference)
        option_texts = [
            self._transcribe(view, oid, clip)
            for oid, clip in zip(view.option_ids, view.options)
        ]
        payload = {
            "task": "reason",
            "challenge_id": view.challenge_id,
            "prompt_template_id": "reason-from-transcripts",
            "prompt": PROMPT_TEMPLATES["reason-from-transcripts"],
            "instruction": view.instruction,
            "reference_transcript": ref_text,
            "option_transcripts": option_texts,
        }
        return self._request(payload)

    def solve(self, view: ChallengeAudio) -> SolverVerdict:
        start = time.monotonic()
        try:
            if self.family == "end-to-end":
                text = self._solve_end_to_end(view)
            else:
                text = self._solve_two_stage(view)
        except AdapterTransportError as exc:
            return SolverVerdict(
                challenge_id=view.challenge_id,
                chosen_index=None,
                raw_response=f"transport-error: {exc}",
                latency_ms=(time.monotonic() - start) * 1000.0,
            )
        return SolverVerdict(
            challenge_id=view.challenge_id,
            chosen_index=extract_choice(text, view.n_options),
            raw_response=text,
            latency_ms=(time.monotonic() - start) * 1000.0,
        )
