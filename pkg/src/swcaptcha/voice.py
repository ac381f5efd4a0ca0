"""Deterministic formant-synthesis voice and a matching toy recognizer.

This is the built-in speech source for demos and the bundled test corpus:
a glottal sawtooth driven through formant resonators, one slot per word,
digit-word lexicon. It is intentionally simple, fully seeded, and fast;
real deployments plug actual TTS/ASR providers into the corpus pipeline
instead. The recognizer does template matching on per-word band spectra,
which is enough to close the generation loop on this voice's own output.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import iirpeak, lfilter, sawtooth

from .audio import DEFAULT_SAMPLE_RATE, AudioClip, rms_envelope
from .seeding import unit_draw

SLOT_SECONDS = 0.40
LEAD_SECONDS = 0.10
TAIL_SECONDS = 0.10
BASE_F0 = 103.0

# word -> ((F1..F4) steady vowel targets in Hz,
#          voiced fraction of the slot, word gain)
# One vowel per word keeps formant tracks steady inside voiced spans;
# duration and gain carry each word's amplitude-envelope identity.
LEXICON: dict[str, tuple[tuple[float, float, float, float], float, float]] = {
    "zero": ((360.0, 1650.0, 2700.0, 3500.0), 0.74, 0.95),
    "one": ((640.0, 1190.0, 2390.0, 3300.0), 0.58, 0.80),
    "two": ((300.0, 870.0, 2240.0, 3250.0), 0.52, 1.00),
    "three": ((270.0, 2290.0, 3010.0, 3600.0), 0.66, 0.70),
    "four": ((570.0, 840.0, 2410.0, 3350.0), 0.72, 0.90),
    "five": ((730.0, 1090.0, 2440.0, 3450.0), 0.62, 0.55),
    "six": ((390.0, 1990.0, 2550.0, 3550.0), 0.46, 0.75),
    "seven": ((530.0, 1840.0, 2480.0, 3400.0), 0.70, 0.65),
    "eight": ((430.0, 2350.0, 2900.0, 3650.0), 0.56, 0.85),
    "nine": ((750.0, 1310.0, 2500.0, 3300.0), 0.68, 0.60),
}


def _resonate(source: np.ndarray, formants, sample_rate: int) -> np.ndarray:
    out = source
    for f in formants:
        b, a = iirpeak(f, Q=14.0, fs=sample_rate)
        out = lfilter(b, a, out)
    return out


def _syllable(
    formants: tuple[float, float, float],
    duration_s: float,
    f0: float,
    sample_rate: int,
) -> np.ndarray:
    n = max(int(round(duration_s * sample_rate)), 8)
    t = np.arange(n) / sample_rate
    source = sawtooth(2.0 * np.pi * f0 * t)
    # mild high-frequency emphasis keeps F2/F3 partials audible
    source[1:] = source[1:] - 0.35 * source[:-1]
    voiced = _resonate(source, formants, sample_rate)
    peak = float(np.max(np.abs(voiced))) or 1.0
    voiced = voiced / peak
    attack = min(int(0.050 * sample_rate), n // 3)
    decay = min(int(0.060 * sample_rate), n // 3)
    env = np.ones(n)
    if attack:
        env[:attack] = 0.5 - 0.5 * np.cos(np.pi * np.arange(attack) / attack)
    if decay:
        env[-decay:] = 0.5 + 0.5 * np.cos(np.pi * np.arange(decay) / decay)
    return voiced * env


def synthesize_phrase(
    prompt: str, seed: int = 0, sample_rate: int = DEFAULT_SAMPLE_RATE
) -> AudioClip:
    """Render a phrase of lexicon words, one fixed-length slot per word.

    Seed jitters pitch, per-word gain, and onset timing slightly, so the
    same prompt yields distinct but deterministic takes.
    """
    words = [w for w in normalize_word_sequence(prompt) if w in LEXICON]
    slot = int(SLOT_SECONDS * sample_rate)
    lead = int(LEAD_SECONDS * sample_rate)
    tail = int(TAIL_SECONDS * sample_rate)
    total = lead + slot * len(words) + tail
    out = np.zeros(total)
    f0 = BASE_F0 * (1.0 + 0.06 * (unit_draw(seed, "f0") - 0.5))
    for i, word in enumerate(words):
        formants, voiced_frac, gain = LEXICON[word]
        gain = gain * (1.0 + 0.10 * (unit_draw(seed, "gain", i) - 0.5))
        onset_jitter = int((unit_draw(seed, "onset", i) - 0.5) * 0.02 * sample_rate)
        voiced = max(int(voiced_frac * slot), sample_rate // 20)
        start = lead + i * slot + max(onset_jitter, 0)
        piece = _syllable(formants, voiced / sample_rate, f0, sample_rate) * gain
        end = min(start + len(piece), total)
        out[start:end] += piece[: end - start]
    peak = float(np.max(np.abs(out)))
    if peak > 0.0:
        out = out * (0.65 / peak)
    return AudioClip(samples=out, sample_rate=sample_rate)


def normalize_word_sequence(prompt: str) -> list[str]:
    cleaned = "".join(c if c.isalnum() or c.isspace() else " " for c in prompt.lower())
    return cleaned.split()


def _band_feature(x: np.ndarray, sample_rate: int) -> np.ndarray:
    """Log-spaced band energies of a segment, L2 normalized."""
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
    freqs = np.fft.rfftfreq(len(x), 1.0 / sample_rate)
    edges = np.geomspace(120.0, 4000.0, 33)
    feats = np.empty(32)
    for b in range(32):
        mask = (freqs >= edges[b]) & (freqs < edges[b + 1])
        feats[b] = np.sqrt(np.sum(spec[mask] ** 2)) if np.any(mask) else 0.0
    norm = float(np.linalg.norm(feats))
    return feats / norm if norm > 0 else feats


def _segments(clip: AudioClip) -> list[tuple[int, int]]:
    """Voiced (start, end) sample ranges split on envelope silence gaps."""
    env = rms_envelope(clip, 400, 160)
    active = env.values > 0.02
    out: list[tuple[int, int]] = []
    start = None
    for i, on in enumerate(active):
        if on and start is None:
            start = i
        elif not on and start is not None:
            out.append((start * 160, i * 160 + 400))
            start = None
    if start is not None:
        out.append((start * 160, len(clip)))
    # merge fragments separated by less than the intra-word dip allows
    merged: list[tuple[int, int]] = []
    for s, e in out:
        if merged and s - merged[-1][1] < int(0.045 * clip.sample_rate):
            merged[-1] = (merged[-1][0], e)
        else:
            merged.append((s, e))
    return merged


def _segment_feature(x: np.ndarray, sample_rate: int) -> tuple[np.ndarray, float]:
    """Spectral feature of the segment core plus its duration in seconds."""
    n = len(x)
    core = x[int(0.1 * n) : max(int(0.9 * n), int(0.1 * n) + 16)]
    return _band_feature(core, sample_rate), n / sample_rate


class SynthVoiceTts:
    """TTS provider backed by the built-in formant voice."""

    serial_only = False

    def synthesize(self, prompt: str, settings=None, seed: int = 0) -> AudioClip:
        return synthesize_phrase(prompt, seed=seed)


class TemplateMatchAsr:
    """Toy recognizer for the built-in voice: per-word template matching.

    Scores each voiced segment against the lexicon by band-spectrum cosine
    similarity with a duration-agreement penalty.
    """

    serial_only = False

    def __init__(self, sample_rate: int = DEFAULT_SAMPLE_RATE) -> None:
        self._sample_rate = sample_rate
        self._templates: dict[str, tuple[np.ndarray, float]] = {}
        for word in LEXICON:
            clip = synthesize_phrase(word, seed=0, sample_rate=sample_rate)
            segs = _segments(clip)
            s, e = segs[0] if segs else (0, len(clip))
            self._templates[word] = _segment_feature(clip.samples[s:e], sample_rate)

    def _score(self, feat: np.ndarray, dur: float, word: str) -> float:
        tfeat, tdur = self._templates[word]
        return float(np.dot(feat, tfeat)) - 0.6 * abs(dur - tdur) / tdur

    def transcribe(self, clip: AudioClip) -> str:
        words: list[str] = []
        for s, e in _segments(clip):
            if e - s < self._sample_rate // 50:
                continue
            feat, dur = _segment_feature(clip.samples[s:e], clip.sample_rate)
            words.append(max(self._templates, key=lambda w: self._score(feat, dur, w)))
        return " ".join(words)
