"""Clean-audio corpus generation.

Runs the automated generation loop: synthesize K candidates per round
from the current prompt, gate on duration, transcribe and score, keep
what clears the intelligibility threshold, fold observed errors into a
prompt refinement, and repeat until the target corpus size is reached.
Providers (TTS/ASR) are pluggable; the repo ships a directory-backed TTS
provider plus the built-in synthetic voice for fully offline runs.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, runtime_checkable

from .audio import AudioClip, load_wav, rms_envelope, save_wav
from .seeding import derive_seed

PAUSE_MARKER = "..."


class ProviderLookupError(KeyError):
    """Directory provider has no clip for (prompt, seed)."""


class PartialCorpusError(RuntimeError):
    """Generation exhausted its round budget before reaching the target."""

    def __init__(self, message: str, entries: list["ScoredClip"], feedback_history: list["Feedback"]):
        super().__init__(message)
        self.entries = entries
        self.feedback_history = feedback_history


@runtime_checkable
class TtsProvider(Protocol):
    serial_only: bool

    def synthesize(self, prompt: str, settings=None, seed: int = 0) -> AudioClip: ...


@runtime_checkable
class AsrProvider(Protocol):
    serial_only: bool

    def transcribe(self, clip: AudioClip) -> str: ...


@dataclass(frozen=True)
class GenerationConfig:
    initial_prompt: str
    candidates_per_round: int = 8
    target_size: int = 30
    max_duration_s: float = 2.0
    score_threshold: float = 0.8
    refinement_budget: int = 3
    max_rounds: int = 16
    provider_settings: dict | None = None
    base_seed: int = 0

    def __post_init__(self) -> None:
        if self.candidates_per_round < 1 or self.target_size < 1:
            raise ValueError("candidates_per_round and target_size must be >= 1")
        if self.max_duration_s <= 0:
            raise ValueError("max_duration_s must be positive")
        if not (0.0 <= self.score_threshold <= 1.0):
            raise ValueError("score_threshold must be in [0, 1]")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


@dataclass(frozen=True)
class ScoredClip:
    clip: AudioClip
    prompt: str
    transcript: str
    score: float
    seed: int
    prompt_revision: int = 0


@dataclass
class Feedback:
    truncated_count: int = 0
    mismatch_tokens: list[tuple[str, str]] = field(default_factory=list)
    mean_score: float = 0.0


@dataclass
class Corpus:
    entries: list[ScoredClip]
    manifest_path: Path | None = None


def normalize_tokens(text: str) -> list[str]:
    cleaned = re.sub(r"[^a-z0-9\s]+", " ", text.lower())
    return cleaned.split()


def _levenshtein_matrix(ref: list[str], hyp: list[str]):
    n, m = len(ref), len(hyp)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dp[i][0] = i
    for j in range(m + 1):
        dp[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            dp[i][j] = min(dp[i - 1][j] + 1, dp[i][j - 1] + 1, dp[i - 1][j - 1] + cost)
    return dp


def token_edit_distance(ref: list[str], hyp: list[str]) -> int:
    return _levenshtein_matrix(ref, hyp)[len(ref)][len(hyp)]


def substitution_pairs(ref: list[str], hyp: list[str]) -> list[tuple[str, str]]:
    """(expected, heard) pairs along one minimal alignment."""
    dp = _levenshtein_matrix(ref, hyp)
    i, j = len(ref), len(hyp)
    subs: list[tuple[str, str]] = []
    while i > 0 and j > 0:
        cost = 0 if ref[i - 1] == hyp[j - 1] else 1
        if dp[i][j] == dp[i - 1][j - 1] + cost:
            if cost:
                subs.append((ref[i - 1], hyp[j - 1]))
            i -= 1
            j -= 1
        elif dp[i][j] == dp[i][j - 1] + 1:
            j -= 1
        else:
            i -= 1
    subs.reverse()
    return subs


def intelligibility_score(clip: AudioClip, prompt: str, transcript: str) -> float:
    """0.6 * transcript match + 0.2 * healthy loudness + 0.2 * no clipping."""
    ref = normalize_tokens(prompt)
    hyp = normalize_tokens(transcript)
    denom = max(len(ref), len(hyp), 1)
    match_term = 1.0 - token_edit_distance(ref, hyp) / denom

    env = rms_envelope(clip)
    mean_rms = float(env.values.mean())
    loudness_term = 1.0 if 0.05 <= mean_rms <= 0.7 else 0.0

    if len(clip):
        clipped_frac = float((abs(clip.samples) > 0.99).mean())
    else:
        clipped_frac = 0.0
    clipping_term = 1.0 if clipped_frac < 0.001 else 0.0

    return 0.6 * match_term + 0.2 * loudness_term + 0.2 * clipping_term


def build_feedback(round_clips: list[ScoredClip], truncated_count: int = 0) -> Feedback:
    """Aggregate token mismatches and duration rejections for one round."""
    mismatches: list[tuple[str, str]] = []
    for sc in round_clips:
        mismatches.extend(
            substitution_pairs(normalize_tokens(sc.prompt), normalize_tokens(sc.transcript))
        )
    mean_score = sum(sc.score for sc in round_clips) / len(round_clips) if round_clips else 0.0
    return Feedback(
        truncated_count=truncated_count,
        mismatch_tokens=mismatches,
        mean_score=mean_score,
    )


def _respell(token: str) -> str:
    letters = [c for c in token if c.isalnum()]
    return "-".join(letters) if letters else token


def refine_prompt(prompt: str, feedback: Feedback) -> str:
    """Deterministic prompt rewrite driven by the round's feedback.

    Tokens the recognizer misheard are re-spelled with hyphenated letter
    spacing; if candidates were dropped for running long, a trailing pause
    marker nudges the synthesizer toward a clean stop. Feedback carrying
    no signal leaves the prompt unchanged.
    """
    misheard = {expected for expected, _ in feedback.mismatch_tokens}
    tokens = prompt.split()
    out = []
    for tok in tokens:
        bare = re.sub(r"[^a-z0-9]", "", tok.lower())
        out.append(_respell(tok) if bare in misheard else tok)
    if feedback.truncated_count > 0 and (not out or out[-1] != PAUSE_MARKER):
        out.append(PAUSE_MARKER)
    return " ".join(out)


def build_corpus(config: GenerationConfig, tts: TtsProvider, asr: AsrProvider) -> Corpus:
    """Run the generation loop until target_size entries pass the gates.

    Each round synthesizes candidates_per_round clips with per-candidate
    seeds, drops clips longer than max_duration_s, scores the survivors,
    and keeps the best scorers at or above score_threshold. The prompt is
    refined from round feedback while the round index is below
    refinement_budget. Raises PartialCorpusError when max_rounds pass
    without filling the corpus.
    """
    entries: list[ScoredClip] = []
    feedback_history: list[Feedback] = []
    prompt = config.initial_prompt
    for round_index in range(config.max_rounds):
        candidates: list[tuple[int, AudioClip]] = []
        for k in range(config.candidates_per_round):
            seed = derive_seed(config.base_seed, "candidate", round_index, k)
            candidates.append((seed, tts.synthesize(prompt, config.provider_settings, seed)))

        kept = [(s, c) for s, c in candidates if c.duration_seconds <= config.max_duration_s]
        truncated = len(candidates) - len(kept)

        scored = [
            ScoredClip(
                clip=c,
                prompt=prompt,
                transcript=(tr := asr.transcribe(c)),
                score=intelligibility_score(c, prompt, tr),
                seed=s,
                prompt_revision=round_index,
            )
            for s, c in kept
        ]
        good = sorted(
            (sc for sc in scored if sc.score >= config.score_threshold),
            key=lambda sc: (-sc.score, sc.seed),
        )
        take = config.target_size - len(entries)
        entries.extend(good[:take])

        feedback = build_feedback(good, truncated)
        feedback_history.append(feedback)

        if len(entries) >= config.target_size:
            return Corpus(entries=entries)
        if round_index < config.refinement_budget:
            prompt = refine_prompt(prompt, feedback)

    raise PartialCorpusError(
        f"collected {len(entries)}/{config.target_size} clips "
        f"in {config.max_rounds} rounds",
        entries,
        feedback_history,
    )


# --- manifest persistence ---------------------------------------------------


def save_corpus(corpus: Corpus, out_dir) -> Path:
    """Write WAVs plus manifest.json; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, sc in enumerate(corpus.entries):
        wav_name = f"c{i:04d}.wav"
        save_wav(sc.clip, out / wav_name)
        rows.append(
            {
                "id": f"c{i:04d}",
                "wav_path": wav_name,
                "prompt": sc.prompt,
                "prompt_revision": sc.prompt_revision,
                "transcript": sc.transcript,
                "score": round(sc.score, 6),
                "seed": sc.seed,
                "duration_s": round(sc.clip.duration_seconds, 6),
            }
        )
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"entries": rows}, sort_keys=True, indent=2) + "\n")
    corpus.manifest_path = manifest
    return manifest


def load_corpus(corpus_dir) -> Corpus:
    root = Path(corpus_dir)
    manifest = root / "manifest.json"
    data = json.loads(manifest.read_text())
    entries = []
    for row in data["entries"]:
        clip = load_wav(root / row["wav_path"])
        entries.append(
            ScoredClip(
                clip=clip,
                prompt=row["prompt"],
                transcript=row["transcript"],
                score=row["score"],
                seed=row["seed"],
                prompt_revision=row.get("prompt_revision", 0),
            )
        )
    return Corpus(entries=entries, manifest_path=manifest)


# --- providers ---------------------------------------------------------------


class DirectoryTtsProvider:
    """Serves pre-recorded WAVs keyed by (prompt, seed).

    This is how real TTS output enters the pipeline: render clips offline
    with any engine, drop them in a directory under the expected names,
    and point the corpus builder here.
    """

    serial_only = False

    def __init__(self, root) -> None:
        self.root = Path(root)

    @staticmethod
    def file_name(prompt: str, seed: int) -> str:
        digest = hashlib.sha1(prompt.encode("utf-8")).hexdigest()[:10]
        return f"{digest}_{seed}.wav"

    def path_for(self, prompt: str, seed: int) -> Path:
        return self.root / self.file_name(prompt, seed)

    def add(self, prompt: str, seed: int, clip: AudioClip) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.path_for(prompt, seed)
        save_wav(clip, path)
        return path

    def synthesize(self, prompt: str, settings=None, seed: int = 0) -> AudioClip:
        path = self.path_for(prompt, seed)
        if not path.exists():
            raise ProviderLookupError(f"no clip for prompt={prompt!r} seed={seed}")
        return load_wav(path)


class CallableTts:
    """Wrap a (prompt, seed) -> AudioClip function as a provider (tests)."""

    serial_only = False

    def __init__(self, fn) -> None:
        self._fn = fn

    def synthesize(self, prompt: str, settings=None, seed: int = 0) -> AudioClip:
        return self._fn(prompt, seed)


class CallableAsr:
    """Wrap a clip -> text function as a provider (tests)."""

    serial_only = False

    def __init__(self, fn) -> None:
        self._fn = fn

    def transcribe(self, clip: AudioClip) -> str:
        return self._fn(clip)
