"""Randomized irreversible conversion.

Downsamples a rendered clip by a random factor drawn uniformly from
[phi_min, phi_max] and keeps the original sample-rate label, so playback
is time-compressed and every partial shifts up by 1/phi. The lost samples
cannot be recovered, which is what breaks both waveform reconstruction
and amplitude-envelope matching against the clean source.
"""

from __future__ import annotations

from dataclasses import dataclass

from .audio import AudioClip, peak_normalize, resample
from .seeding import unit_draw


@dataclass(frozen=True)
class ConversionParams:
    """Range of the downsampling factor plus the deterministic seed."""

    phi_min: float = 0.5
    phi_max: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.phi_min <= self.phi_max <= 1.0):
            raise ValueError("need 0 < phi_min <= phi_max <= 1")


def sample_phi(params: ConversionParams, draw_index: int) -> float:
    """Uniform draw over [phi_min, phi_max], fixed by (seed, draw_index)."""
    u = unit_draw(params.seed, "phi", draw_index)
    return params.phi_min + u * (params.phi_max - params.phi_min)


def irreversible_convert(
    clip: AudioClip,
    params: ConversionParams,
    draw_index: int = 0,
    force_phi: float | None = None,
) -> AudioClip:
    """Resample to floor(phi * L) samples; the rate label is unchanged.

    force_phi bypasses the random draw and exists for tests and the
    hidden CLI flag only.
    """
    if len(clip) == 0:
        raise ValueError("cannot convert an empty clip")
    phi = force_phi if force_phi is not None else sample_phi(params, draw_index)
    if not (0.0 < phi <= 1.0):
        raise ValueError(f"phi must be in (0, 1], got {phi}")
    target = int(phi * len(clip))
    out = resample(clip, max(target, 1))
    return peak_normalize(out, 0.9)
