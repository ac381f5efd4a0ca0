"""Sine-wave speech rendering.

Reduces speech to a handful of time-varying sinusoids that keep the
global temporal envelope and coarse formant trajectories while dropping
everything automatic recognizers key on. Analysis is classical linear
prediction: per-frame all-pole fit, pole angles as formant candidates,
narrow-bandwidth poles kept, lowest k selected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .audio import AudioClip

SILENCE_FLOOR_RMS = 0.01
ANCHOR_RMS = 0.06
RATE_LIMIT_HZ = 25.0
POLE_BANDWIDTH_HZ = 400.0
MIN_FORMANT_HZ = 80.0


class ClipTooShortError(ValueError):
    """Input shorter than one analysis window."""


@dataclass(frozen=True)
class SineWaveParams:
    """Analysis-synthesis settings for the sine-wave renderer."""

    window_size: int = 512
    hop_length: int = 160
    num_formants: int = 4
    lpc_order: int = 12
    pre_emphasis: float = 0.97

    def __post_init__(self) -> None:
        if not (self.window_size >= 2 * self.hop_length >= 2):
            raise ValueError("need window_size >= 2*hop_length >= 2")
        if not (1 <= self.num_formants <= 8):
            raise ValueError("num_formants must be in [1, 8]")
        if self.lpc_order < 2 * self.num_formants + 2:
            raise ValueError("lpc_order must be >= 2*num_formants + 2")
        if not (0.0 <= self.pre_emphasis < 1.0):
            raise ValueError("pre_emphasis must be in [0, 1)")


@dataclass(frozen=True)
class FormantTrack:
    """Per-frame (frequency, amplitude) pairs for k partials.

    frames has shape (n_frames, k, 2); every frame holds exactly k
    partials sorted by ascending frequency, and silent frames carry
    zero-amplitude partials rather than being omitted.
    """

    frames: np.ndarray
    hop_length: int
    source_length: int
    sample_rate: int
    window_size: int = 512

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.frames, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "frames", arr)

    @property
    def num_formants(self) -> int:
        return int(self.frames.shape[1])

    def to_json(self) -> str:
        payload = {
            "sample_rate": self.sample_rate,
            "hop_length": self.hop_length,
            "window_size": self.window_size,
            "source_length": self.source_length,
            "num_formants": self.num_formants,
            "frames": [
                [[round(float(f), 4), round(float(a), 6)] for f, a in frame]
                for frame in self.frames
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "FormantTrack":
        d = json.loads(text)
        return cls(
            frames=np.asarray(d["frames"], dtype=np.float64),
            hop_length=d["hop_length"],
            source_length=d["source_length"],
            sample_rate=d["sample_rate"],
            window_size=d.get("window_size", 512),
        )


def _levinson(r: np.ndarray, order: int) -> np.ndarray:
    """Levinson-Durbin recursion; returns LPC polynomial [1, a1..ap]."""
    a = np.zeros(order + 1)
    a[0] = 1.0
    err = float(r[0])
    for i in range(1, order + 1):
        if err <= 0.0:
            break
        acc = float(r[i])
        for j in range(1, i):
            acc += a[j] * r[i - j]
        k = -acc / err
        prev = a.copy()
        a[i] = k
        for j in range(1, i):
            a[j] = prev[j] + k * prev[i - j]
        err *= 1.0 - k * k
    return a


def _frame_starts(n_samples: int, window: int, hop: int) -> np.ndarray:
    n_frames = 1 + (n_samples - window) // hop
    return np.arange(n_frames) * hop


def _candidate_formants(
    frame: np.ndarray, params: SineWaveParams, sample_rate: int
) -> list[tuple[float, float]]:
    """(frequency, envelope magnitude) candidates from one frame's LPC fit."""
    beta = params.pre_emphasis
    pre = np.empty_like(frame)
    pre[0] = frame[0]
    pre[1:] = frame[1:] - beta * frame[:-1]
    windowed = pre * np.hamming(len(pre))

    order = params.lpc_order
    spec = np.fft.rfft(windowed, 2 * len(windowed))
    r = np.fft.irfft(np.abs(spec) ** 2)[: order + 1]
    if r[0] <= 0.0:
        return []
    r = r / r[0]
    a = _levinson(r, order)

    roots = np.roots(a)
    roots = roots[np.imag(roots) > 1e-8]
    if roots.size == 0:
        return []
    freqs = np.angle(roots) * sample_rate / (2.0 * np.pi)
    mags = np.abs(roots)
    bandwidths = -np.log(np.maximum(mags, 1e-12)) * sample_rate / np.pi

    keep = (
        (bandwidths <= POLE_BANDWIDTH_HZ)
        & (freqs >= MIN_FORMANT_HZ)
        & (freqs <= sample_rate / 2.0 - MIN_FORMANT_HZ)
    )
    out: list[tuple[float, float]] = []
    for f in np.sort(freqs[keep]):
        w = 2.0 * np.pi * f / sample_rate
        z = np.exp(-1j * w * np.arange(order + 1))
        lpc_env = 1.0 / max(abs(np.dot(a, z)), 1e-9)
        # undo the pre-emphasis tilt so magnitudes track the original frame
        de_emph = abs(1.0 - beta * np.exp(-1j * w))
        out.append((float(f), float(lpc_env / max(de_emph, 1e-9))))
    return out


def _default_freqs(k: int) -> np.ndarray:
    return np.array([500.0 * (j + 1) for j in range(k)])


def _dedupe_candidates(cands: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Collapse pole pairs closer than 60 Hz, keeping the stronger one."""
    out: list[tuple[float, float]] = []
    for f, m in cands:
        if out and f - out[-1][0] < 60.0:
            if m > out[-1][1]:
                out[-1] = (f, m)
        else:
            out.append((f, m))
    return out


def _align_tracks(
    cands: list[float], anchors: list[float], max_jump_hz: float
) -> list[tuple[int, int]]:
    """Max-cardinality, min-displacement order-preserving matching.

    Both lists are ascending; a pair is only admissible within max_jump_hz.
    """
    m, n = len(cands), len(anchors)
    score = np.zeros((m + 1, n + 1))
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            d = abs(cands[i - 1] - anchors[j - 1])
            best = max(score[i - 1, j], score[i, j - 1])
            if d < max_jump_hz:
                best = max(best, score[i - 1, j - 1] + (max_jump_hz - d))
            score[i, j] = best
    pairs: list[tuple[int, int]] = []
    i, j = m, n
    while i > 0 and j > 0:
        d = abs(cands[i - 1] - anchors[j - 1])
        if d < max_jump_hz and score[i, j] == score[i - 1, j - 1] + (max_jump_hz - d):
            pairs.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        elif score[i, j] == score[i - 1, j]:
            i -= 1
        else:
            j -= 1
    return pairs


def _assign_slots(
    cands: list[tuple[float, float]],
    prev_freqs: np.ndarray,
    prev_mags: np.ndarray,
    max_jump_hz: float = 250.0,
) -> tuple[list[float], list[float]]:
    """Seat this frame's candidates so no audible partial ever glides far.

    Slot identity is positional (synthesis interpolates slot j against
    slot j of the neighboring frames), so the rules below keep every
    frequency change inaudible:

    - a candidate matched to an audible slot moves it at a bounded rate
      (pole angles wobble by up to half the source's harmonic spacing,
      and chasing each flip would chirp the render);
    - a candidate matched to a silent slot snaps it (nothing sounding
      moves with it);
    - an audible slot with no candidate fades out at its old frequency;
    - an unmatched candidate may claim a silent slot, but only above the
      highest audible slot, so sort order never reshuffles under content
      that is currently sounding; below-ceiling newcomers are transient
      pole-split artifacts and are dropped.
    """
    k = len(prev_freqs)
    if not cands:
        return list(prev_freqs), [0.0] * k
    if not np.any(np.asarray(prev_mags) > 0.0):
        # fresh onset: content seats from the bottom, pads park above it,
        # so later newcomers always find spare capacity above the ceiling
        freqs = [f for f, _ in cands]
        mags = [m for _, m in cands]
        top = max(freqs)
        while len(freqs) < k:
            top = min(top + 400.0, 7900.0)
            freqs.append(top)
            mags.append(0.0)
        return freqs, mags
    pairs = _align_tracks(
        [f for f, _ in cands], [float(f) for f in prev_freqs], max_jump_hz
    )
    matched_c = {ci for ci, _ in pairs}
    matched_slots = {sj for _, sj in pairs}

    freqs = [float(f) for f in prev_freqs]
    mags = [0.0] * k
    for ci, sj in pairs:
        cand_f, cand_m = cands[ci]
        if prev_mags[sj] > 0.0:
            step = min(max(cand_f - freqs[sj], -RATE_LIMIT_HZ), RATE_LIMIT_HZ)
            freqs[sj] = freqs[sj] + step
        else:
            freqs[sj] = cand_f
        mags[sj] = cand_m

    audible_ceiling = max(
        (freqs[j] for j in range(k) if prev_mags[j] > 0.0), default=None
    )
    spare_slots = [
        j for j in range(k)
        if j not in matched_slots and prev_mags[j] == 0.0
        and (audible_ceiling is None or freqs[j] > audible_ceiling)
    ]
    fresh = sorted(
        ((f, m) for i, (f, m) in enumerate(cands) if i not in matched_c),
        key=lambda fm: -fm[1],
    )
    for f, m in fresh:
        if not spare_slots:
            break
        if audible_ceiling is not None and f <= audible_ceiling + 60.0:
            continue
        if any(abs(f - freqs[j]) <= 300.0 for j in range(k) if mags[j] > 0.0):
            continue
        sj = min(spare_slots, key=lambda j: abs(freqs[j] - f))
        spare_slots.remove(sj)
        freqs[sj] = f
        mags[sj] = m

    order = np.argsort(freqs)
    return [freqs[o] for o in order], [mags[o] for o in order]


def analyze_formants(clip: AudioClip, params: SineWaveParams | None = None) -> FormantTrack:
    """Track k (frequency, amplitude) partials over analysis frames.

    Partial amplitudes follow the frame's spectral envelope, rescaled so
    the partials' combined power equals the frame's RMS power; frames
    below the silence floor emit zero-amplitude partials at the previous
    frame's frequencies.
    """
    params = params or SineWaveParams()
    x = clip.samples
    if len(x) < params.window_size:
        raise ClipTooShortError(
            f"clip of {len(x)} samples is shorter than one window "
            f"({params.window_size})"
        )
    k = params.num_formants
    starts = _frame_starts(len(x), params.window_size, params.hop_length)
    frames = np.zeros((len(starts), k, 2))
    frame_rms = np.zeros(len(starts))
    prev_freqs = _default_freqs(k)
    prev_mags = np.zeros(k)

    for i, s in enumerate(starts):
        frame = x[s : s + params.window_size]
        rms = float(np.sqrt(np.mean(frame * frame)))
        frame_rms[i] = rms
        if rms < SILENCE_FLOOR_RMS:
            frames[i, :, 0] = prev_freqs
            prev_mags = np.zeros(k)
            continue
        cands = _dedupe_candidates(_candidate_formants(frame, params, clip.sample_rate))[:k]
        freqs, mags = _assign_slots(cands, prev_freqs, prev_mags)
        power = sum(m * m for m in mags) / 2.0
        scale = np.sqrt(rms * rms / power) if power > 0 else 0.0
        frames[i, :, 0] = freqs
        frames[i, :, 1] = np.minimum(np.asarray(mags) * scale, 1.0)
        prev_freqs = np.asarray(freqs)
        prev_mags = np.asarray(mags)

    _settle_unanchored_frequencies(frames, frame_rms)
    return FormantTrack(
        frames=frames,
        hop_length=params.hop_length,
        source_length=len(x),
        sample_rate=clip.sample_rate,
        window_size=params.window_size,
    )


def _settle_unanchored_frequencies(frames: np.ndarray, frame_rms: np.ndarray) -> None:
    """Re-pin frequencies of quiet frames to their nearest loud neighbor.

    Synthesis interpolates frequencies between frame centers, and the
    all-pole fit is unreliable exactly where amplitude ramps (onsets,
    decays, silence). Left to themselves those frames inject frequency
    glides into the render at the worst moments. Quiet runs instead adopt
    the flanking anchor frames' frequencies, split at the run midpoint, so
    any glide happens deep inside near-silence.
    """
    anchors = np.where(frame_rms >= ANCHOR_RMS)[0]
    if anchors.size == 0:
        voiced = np.where(frames[:, :, 1].sum(axis=1) > 0.0)[0]
        if voiced.size == 0:
            return
        anchors = voiced
    first, last = int(anchors[0]), int(anchors[-1])
    frames[:first, :, 0] = frames[first, :, 0]
    frames[last + 1 :, :, 0] = frames[last, :, 0]
    for left, right in zip(anchors[:-1], anchors[1:]):
        if right - left <= 1:
            continue
        mid = (left + right + 1) // 2
        frames[left + 1 : mid, :, 0] = frames[left, :, 0]
        frames[mid:right, :, 0] = frames[right, :, 0]


def synthesize(track: FormantTrack) -> AudioClip:
    """Oscillator bank resynthesis with continuous phase.

    Frequencies and amplitudes interpolate linearly between frame centers;
    each partial's phase accumulates over the whole clip, so there are no
    per-frame phase resets. Output is peak-normalized to 0.9.
    """
    n = track.source_length
    if track.frames.shape[0] == 0 or n == 0:
        return AudioClip(samples=np.zeros(n), sample_rate=track.sample_rate)
    centers = (
        np.arange(track.frames.shape[0]) * track.hop_length + track.window_size / 2.0
    )
    t = np.arange(n, dtype=np.float64)
    out = np.zeros(n)
    for j in range(track.num_formants):
        freq = np.interp(t, centers, track.frames[:, j, 0])
        amp = np.interp(t, centers, track.frames[:, j, 1])
        phase = 2.0 * np.pi * np.cumsum(freq) / track.sample_rate
        out += amp * np.sin(phase)
    peak = float(np.max(np.abs(out)))
    if peak > 0.0:
        out = out * (0.9 / peak)
    return AudioClip(samples=out, sample_rate=track.sample_rate)


def render_sinewave(clip: AudioClip, params: SineWaveParams | None = None) -> AudioClip:
    """Full render: analyze then resynthesize; output length equals input."""
    params = params or SineWaveParams()
    return synthesize(analyze_formants(clip, params))
