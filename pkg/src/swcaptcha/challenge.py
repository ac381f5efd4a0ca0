"""Option-based challenge assembly.

A challenge pairs a clean reference clip with a small set of options:
exactly one is the hardened illusion rendering of the reference's own
content, the rest are illusion clips of other sources, and sometimes one
distractor slot carries unmodified clean audio to poison amplitude
heuristics. Composition, ordering, and phrasing are all randomized per
challenge.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .audio import AudioClip, load_wav, save_wav
from .convert import ConversionParams, irreversible_convert, sample_phi
from .corpus import Corpus
from .seeding import derive_seed
from .sinewave import ClipTooShortError, SineWaveParams, render_sinewave

logger = logging.getLogger(__name__)

DEFAULT_SEGMENT_SECONDS = 1.0

INSTRUCTION_TEMPLATES = (
    "Listen to the reference voice first, then pick the distorted clip that says the same thing.",
    "Play the clean sample, then choose which whistling clip carries the same words.",
    "One option hides the same phrase as the reference audio. Listen to everything and select it.",
    "Compare each option against the reference recording and pick the one with matching content.",
    "The reference is natural speech. Choose the tone-like option that repeats its words.",
)


class InsufficientSourcesError(ValueError):
    """Not enough distinct source prompts to assemble a challenge."""


class InvalidAnswerError(ValueError):
    """Selected option index is outside the challenge's option range."""


class OptionKind(str, Enum):
    ILLUSION_CORRECT = "illusion-correct"
    ILLUSION_DISTRACTOR = "illusion-distractor"
    CLEAN_DISTRACTOR = "clean-distractor"


@dataclass(frozen=True)
class IllusionEntry:
    source_id: str
    prompt: str
    clean: AudioClip
    illusion: AudioClip
    render_params: SineWaveParams
    phi: float


@dataclass
class IllusionCorpus:
    entries: list[IllusionEntry]


@dataclass(frozen=True)
class Option:
    option_id: str
    clip: AudioClip
    kind: OptionKind
    segment_length_s: float = DEFAULT_SEGMENT_SECONDS


@dataclass
class Challenge:
    challenge_id: str
    reference: AudioClip
    reference_prompt: str
    options: list[Option]
    answer_index: int
    rng_seed: int
    instruction: str
    phi: float | None = None
    created_at: float | None = None


def build_illusion_corpus(
    corpus: Corpus,
    render_params: SineWaveParams | None = None,
    conversion: ConversionParams | None = None,
) -> IllusionCorpus:
    """Render and convert every corpus entry; draw index = entry ordinal."""
    render_params = render_params or SineWaveParams()
    conversion = conversion or ConversionParams()
    entries: list[IllusionEntry] = []
    for i, sc in enumerate(corpus.entries):
        try:
            rendered = render_sinewave(sc.clip, render_params)
        except ClipTooShortError as exc:
            logger.warning("skipping corpus entry %d: %s", i, exc)
            continue
        illusion = irreversible_convert(rendered, conversion, draw_index=i)
        entries.append(
            IllusionEntry(
                source_id=f"c{i:04d}",
                prompt=sc.prompt,
                clean=sc.clip,
                illusion=illusion,
                render_params=render_params,
                phi=sample_phi(conversion, i),
            )
        )
    if not entries:
        raise ValueError("no corpus entry survived illusion rendering")
    return IllusionCorpus(entries=entries)


def n_segments(clip: AudioClip, segment_length_s: float = DEFAULT_SEGMENT_SECONDS) -> int:
    seg = int(round(segment_length_s * clip.sample_rate))
    return max(1, math.ceil(len(clip) / seg)) if seg > 0 else 1


def segment(
    clip: AudioClip, segment_index: int, segment_length_s: float = DEFAULT_SEGMENT_SECONDS
) -> AudioClip:
    """Samples [i*seg : (i+1)*seg]; past-the-end yields an empty clip."""
    if segment_index < 0:
        raise ValueError("segment_index must be >= 0")
    seg = int(round(segment_length_s * clip.sample_rate))
    start = segment_index * seg
    return AudioClip(clip.samples[start : start + seg], clip.sample_rate)


clip_segment = segment


def generate_challenge(
    illusions: IllusionCorpus,
    n_options: int = 3,
    clean_decoy_prob: float = 0.3,
    rng_seed: int = 0,
    segment_length_s: float = DEFAULT_SEGMENT_SECONDS,
) -> Challenge:
    """Assemble one challenge, fully determined by rng_seed.

    The target source supplies the clean reference and the correct option;
    distractors come from other sources with different prompts; with
    probability clean_decoy_prob one distractor slot holds clean audio of
    a non-target source instead of an illusion clip.
    """
    if n_options < 2:
        raise ValueError("n_options must be >= 2")
    distinct_prompts = {e.prompt for e in illusions.entries}
    if len(distinct_prompts) < n_options:
        raise InsufficientSourcesError(
            f"need at least {n_options} distinct source prompts, "
            f"have {len(distinct_prompts)}"
        )
    rng = np.random.default_rng(derive_seed(rng_seed, "challenge"))
    challenge_id = f"ch-{derive_seed(rng_seed, 'challenge-id'):016x}"

    target = illusions.entries[int(rng.integers(len(illusions.entries)))]
    pool = [e for e in illusions.entries if e.prompt != target.prompt]
    distractors: list[IllusionEntry] = []
    used_prompts = {target.prompt}
    for idx in rng.permutation(len(pool)):
        cand = pool[int(idx)]
        if cand.prompt in used_prompts:
            continue
        distractors.append(cand)
        used_prompts.add(cand.prompt)
        if len(distractors) == n_options - 1:
            break
    if len(distractors) < n_options - 1:
        raise InsufficientSourcesError("not enough distinct-prompt distractors")

    def opt_id() -> str:
        return f"o{int(rng.integers(2**62)):016x}"

    options = [
        Option(opt_id(), target.illusion, OptionKind.ILLUSION_CORRECT, segment_length_s)
    ]
    decoy_slot = -1
    if float(rng.random()) < clean_decoy_prob:
        decoy_slot = int(rng.integers(len(distractors)))
    for j, entry in enumerate(distractors):
        if j == decoy_slot:
            options.append(Option(opt_id(), entry.clean, OptionKind.CLEAN_DISTRACTOR, segment_length_s))
        else:
            options.append(
                Option(opt_id(), entry.illusion, OptionKind.ILLUSION_DISTRACTOR, segment_length_s)
            )

    order = list(rng.permutation(n_options))
    options = [options[int(i)] for i in order]
    answer_index = order.index(0)
    instruction = INSTRUCTION_TEMPLATES[int(rng.integers(len(INSTRUCTION_TEMPLATES)))]

    return Challenge(
        challenge_id=challenge_id,
        reference=target.clean,
        reference_prompt=target.prompt,
        options=options,
        answer_index=answer_index,
        rng_seed=rng_seed,
        instruction=instruction,
        phi=target.phi,
    )


def verify_answer(challenge: Challenge, selected_index: int) -> bool:
    if not isinstance(selected_index, int) or isinstance(selected_index, bool):
        raise InvalidAnswerError("selected_index must be an integer")
    if not (0 <= selected_index < len(challenge.options)):
        raise InvalidAnswerError(
            f"selected_index {selected_index} out of range for "
            f"{len(challenge.options)} options"
        )
    return selected_index == challenge.answer_index


def challenge_view(challenge: Challenge) -> dict:
    """Client-safe manifest: locators and counts only, no answer material."""
    return {
        "challenge_id": challenge.challenge_id,
        "instruction": challenge.instruction,
        "reference": {
            "clip_id": "reference",
            "n_segments": n_segments(challenge.reference),
        },
        "options": [
            {
                "clip_id": o.option_id,
                "n_segments": n_segments(o.clip, o.segment_length_s),
            }
            for o in challenge.options
        ],
    }


# --- bundle persistence -------------------------------------------------------


def save_challenge(challenge: Challenge, out_dir) -> Path:
    """manifest.json (client view), answer.json (secrets), WAVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(
        json.dumps(challenge_view(challenge), sort_keys=True, indent=2) + "\n"
    )
    answer = {
        "answer_index": challenge.answer_index,
        "kinds": [o.kind.value for o in challenge.options],
        "phi": challenge.phi,
        "seed": challenge.rng_seed,
    }
    (out / "answer.json").write_text(json.dumps(answer, sort_keys=True, indent=2) + "\n")
    save_wav(challenge.reference, out / "reference.wav")
    for o in challenge.options:
        save_wav(o.clip, out / f"{o.option_id}.wav")
    return out


def load_challenge(bundle_dir) -> Challenge:
    root = Path(bundle_dir)
    view = json.loads((root / "manifest.json").read_text())
    answer = json.loads((root / "answer.json").read_text())
    reference = load_wav(root / "reference.wav")
    options = []
    for meta, kind in zip(view["options"], answer["kinds"]):
        clip = load_wav(root / f"{meta['clip_id']}.wav")
        options.append(Option(meta["clip_id"], clip, OptionKind(kind)))
    return Challenge(
        challenge_id=view["challenge_id"],
        reference=reference,
        reference_prompt="",
        options=options,
        answer_index=answer["answer_index"],
        rng_seed=answer["seed"],
        instruction=view["instruction"],
        phi=answer.get("phi"),
    )
