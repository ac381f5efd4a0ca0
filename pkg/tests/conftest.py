from __future__ import annotations

import numpy as np
import pytest

from swcaptcha.bundled import build_bundled_corpus
from swcaptcha.challenge import build_illusion_corpus
from swcaptcha.convert import ConversionParams
from swcaptcha.seeding import derive_seed
from swcaptcha.sinewave import SineWaveParams

BUNDLE_SEED = 7


@pytest.fixture(scope="session")
def bundled_corpus():
    return build_bundled_corpus(seed=BUNDLE_SEED)


@pytest.fixture(scope="session")
def illusions_converted(bundled_corpus):
    conv = ConversionParams(seed=derive_seed(BUNDLE_SEED, "convert"))
    return build_illusion_corpus(bundled_corpus, SineWaveParams(), conv)


@pytest.fixture(scope="session")
def illusions_unconverted(bundled_corpus):
    conv = ConversionParams(phi_min=1.0, phi_max=1.0, seed=derive_seed(BUNDLE_SEED, "convert"))
    return build_illusion_corpus(bundled_corpus, SineWaveParams(), conv)


def sine_clip(freq: float = 440.0, amplitude: float = 0.5, seconds: float = 1.0, rate: int = 16000):
    from swcaptcha.audio import AudioClip

    t = np.arange(int(seconds * rate)) / rate
    return AudioClip(amplitude * np.sin(2 * np.pi * freq * t), rate)
