"""Bundled offline corpus: thirty digit phrases through the built-in voice.

Everything here is deterministic given the seed, so tests and the
acceptance suite can rebuild the exact same corpus on any machine without
shipping audio files in the repository.
"""

from __future__ import annotations

from pathlib import Path

from .corpus import Corpus, GenerationConfig, build_corpus, save_corpus
from .seeding import derive_seed
from .voice import SynthVoiceTts, TemplateMatchAsr

BUNDLED_PROMPTS: tuple[str, ...] = (
    "zero one five", "zero five eight", "one two six",
    "one three six", "two one seven", "two five eight",
    "two seven eight", "two seven nine", "two nine three",
    "two nine eight", "three four five", "four three nine",
    "four six five", "four seven nine", "four nine zero",
    "five zero four", "five six one", "six zero one",
    "six five two", "seven one three", "seven four three",
    "seven eight four", "eight zero four", "eight zero five",
    "eight zero six", "eight four six", "eight five seven",
    "eight nine one", "nine zero five", "nine seven six",
)


def build_bundled_corpus(out_dir=None, seed: int = 7) -> Corpus:
    """One generation-loop run per prompt, one entry each, merged."""
    tts = SynthVoiceTts()
    asr = TemplateMatchAsr()
    entries = []
    for i, prompt in enumerate(BUNDLED_PROMPTS):
        config = GenerationConfig(
            initial_prompt=prompt,
            candidates_per_round=3,
            target_size=1,
            refinement_budget=2,
            max_rounds=4,
            base_seed=derive_seed(seed, "bundled", i),
        )
        sub = build_corpus(config, tts, asr)
        entries.extend(sub.entries)
    corpus = Corpus(entries=entries)
    if out_dir is not None:
        save_corpus(corpus, Path(out_dir))
    return corpus
