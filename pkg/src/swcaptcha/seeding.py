"""Stable seed derivation shared by every randomized stage.

All randomness in the toolkit flows from a user-visible integer seed plus
a stage label and item ordinal, hashed together. Adding a new stage never
perturbs the draws of existing stages.
"""

from __future__ import annotations

import hashlib


def derive_seed(*parts: object) -> int:
    """Map an arbitrary tuple of labels/ordinals to a 64-bit seed."""
    key = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def unit_draw(*parts: object) -> float:
    """Deterministic draw in [0, 1) keyed by the same label scheme."""
    return derive_seed(*parts) / 2.0**64
