"""Audio container, WAV persistence, resampling, framing, RMS envelopes.

Canonical internal format is mono float64 in [-1, 1]; files are 16-bit
PCM WAV. 16 kHz is the default rate used by the rest of the toolkit.
"""

from __future__ import annotations

import math
import wave
from dataclasses import dataclass, field

import numpy as np

DEFAULT_SAMPLE_RATE = 16000

# Frame/hop used wherever an unparameterized "RMS envelope" is meant
# (intelligibility loudness term, envelope-preservation checks, RMS solver).
ENVELOPE_FRAME = 400
ENVELOPE_HOP = 160


class AudioFormatError(ValueError):
    """File is not a readable RIFF/WAVE stream."""


class UnsupportedFormatError(ValueError):
    """WAV encoding other than 16-bit integer PCM."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AudioClip:
    """Mono audio: samples in [-1, 1] plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", _freeze(self.samples))
        if self.sample_rate < 8000:
            raise ValueError(f"sample_rate must be >= 8000, got {self.sample_rate}")
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        if self.samples.size and np.max(np.abs(self.samples)) > 1.0 + 1e-12:
            raise ValueError("samples must lie in [-1, 1]")

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_seconds(self) -> float:
        return len(self) / self.sample_rate


@dataclass(frozen=True)
class Envelope:
    """Frame-wise RMS magnitudes with the framing that produced them."""

    values: np.ndarray
    frame_length: int
    hop_length: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _freeze(self.values))

    def __len__(self) -> int:
        return int(self.values.size)


def load_wav(path) -> AudioClip:
    """Read a 16-bit PCM WAV; stereo is downmixed to mono by averaging."""
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except wave.Error as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise AudioFormatError(f"{path}: truncated WAV") from exc
    if sampwidth != 2:
        raise UnsupportedFormatError(
            f"{path}: only 16-bit PCM supported, got sample width {sampwidth}"
        )
    if n_channels not in (1, 2):
        raise UnsupportedFormatError(f"{path}: {n_channels} channels unsupported")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    if n_channels == 2:
        data = data.reshape(-1, 2).mean(axis=1)
    return AudioClip(samples=data / 32768.0, sample_rate=rate)


def save_wav(clip: AudioClip, path) -> None:
    """Write 16-bit PCM mono WAV; out-of-range samples are clamped."""
    ints = np.clip(np.rint(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(ints.tobytes())


def wav_bytes(clip: AudioClip) -> bytes:
    """The exact byte stream save_wav would produce, in memory."""
    import io

    buf = io.BytesIO()
    ints = np.clip(np.rint(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(ints.tobytes())
    return buf.getvalue()


def rms_envelope(
    clip: AudioClip,
    frame_length: int = ENVELOPE_FRAME,
    hop_length: int = ENVELOPE_HOP,
) -> Envelope:
    """Frame-wise RMS; the final partial frame is zero-padded."""
    if frame_length < 1 or hop_length < 1:
        raise ValueError("frame_length and hop_length must be >= 1")
    x = clip.samples
    n = len(x)
    if n == 0:
        return Envelope(np.zeros(1), frame_length, hop_length)
    if n >= frame_length:
        count = math.ceil((n - frame_length) / hop_length) + 1
    else:
        count = 1
    values = np.empty(count)
    for i in range(count):
        frame = x[i * hop_length : i * hop_length + frame_length]
        values[i] = math.sqrt(float(np.sum(frame * frame)) / frame_length)
    return Envelope(values, frame_length, hop_length)


def resample(clip: AudioClip, target_count: int) -> AudioClip:
    """Linear interpolation onto target_count uniformly spaced points.

    The output keeps the input's sample_rate field; callers that change
    the effective rate own that relabeling policy.
    """
    if target_count < 1:
        raise ValueError("target_count must be >= 1")
    x = clip.samples
    if len(x) == 0:
        raise ValueError("cannot resample an empty clip")
    if len(x) == 1:
        out = np.full(target_count, x[0])
    else:
        positions = np.linspace(0.0, len(x) - 1.0, target_count)
        out = np.interp(positions, np.arange(len(x)), x)
    return AudioClip(samples=out, sample_rate=clip.sample_rate)


def peak_normalize(clip: AudioClip, peak: float = 0.9) -> AudioClip:
    """Scale so the absolute peak equals `peak`; silence passes through."""
    m = float(np.max(np.abs(clip.samples))) if len(clip) else 0.0
    if m == 0.0:
        return clip
    return AudioClip(samples=clip.samples * (peak / m), sample_rate=clip.sample_rate)
