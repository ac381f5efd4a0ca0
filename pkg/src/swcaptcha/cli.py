"""Command-line entry point chaining every pipeline stage.

All randomized stages derive their randomness from the global --seed plus
a stage label, so a fixed seed reproduces every output byte.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .audio import load_wav, save_wav
from .bundled import BUNDLED_PROMPTS, build_bundled_corpus
from .challenge import (
    build_illusion_corpus,
    generate_challenge,
    save_challenge,
)
from .convert import ConversionParams, irreversible_convert
from .corpus import (
    DirectoryTtsProvider,
    GenerationConfig,
    PartialCorpusError,
    build_corpus,
    load_corpus,
    save_corpus,
    Corpus,
)
from .harness import evaluate
from .seeding import derive_seed
from .sinewave import SineWaveParams, analyze_formants, synthesize
from .solvers import RandomSolver, RmsEnvelopeSolver, attacker_view
from .voice import SynthVoiceTts, TemplateMatchAsr


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Global seed; every randomized stage derives from it.")
@click.pass_context
def main(ctx: click.Context, seed: int) -> None:
    """Sine-wave speech audio CAPTCHA toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed


@main.group()
def corpus() -> None:
    """Clean-audio corpus stages."""


@corpus.command("build")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--prompt", "prompts", multiple=True, help="Prompt text; repeatable.")
@click.option("--prompts-file", type=click.Path(exists=True, path_type=Path), help="One prompt per line.")
@click.option("--bundled", "use_bundled", is_flag=True, help="Use the built-in thirty-phrase prompt set.")
@click.option("--tts", "tts_kind", default="synth", show_default=True, help="'synth' or 'dir:<path>' with pre-recorded WAVs.")
@click.option("--candidates", "-k", default=3, show_default=True)
@click.option("--n-target", default=1, show_default=True, help="Entries to collect per prompt.")
@click.option("--tau", default=0.8, show_default=True, help="Intelligibility score threshold.")
@click.option("--t-max", default=2.0, show_default=True, help="Maximum clip duration in seconds.")
@click.option("--refine-budget", default=2, show_default=True)
@click.option("--max-rounds", default=8, show_default=True)
@click.pass_context
def corpus_build(
    ctx, out_dir, prompts, prompts_file, use_bundled, tts_kind,
    candidates, n_target, tau, t_max, refine_budget, max_rounds,
) -> None:
    """Run the generation loop for each prompt and merge the results."""
    seed = ctx.obj["seed"]
    prompt_list = list(prompts)
    if prompts_file:
        prompt_list += [l.strip() for l in prompts_file.read_text().splitlines() if l.strip()]
    if use_bundled:
        prompt_list += list(BUNDLED_PROMPTS)
    if not prompt_list:
        raise click.UsageError("no prompts given; pass --prompt/--prompts-file/--bundled")

    if tts_kind == "synth":
        tts = SynthVoiceTts()
    elif tts_kind.startswith("dir:"):
        tts = DirectoryTtsProvider(tts_kind[4:])
    else:
        raise click.UsageError(f"unknown --tts: {tts_kind}")
    asr = TemplateMatchAsr()

    entries = []
    for i, prompt in enumerate(prompt_list):
        config = GenerationConfig(
            initial_prompt=prompt,
            candidates_per_round=candidates,
            target_size=n_target,
            max_duration_s=t_max,
            score_threshold=tau,
            refinement_budget=refine_budget,
            max_rounds=max_rounds,
            base_seed=derive_seed(seed, "bundled", i),
        )
        try:
            sub = build_corpus(config, tts, asr)
        except PartialCorpusError as exc:
            raise click.ClickException(f"prompt {prompt!r}: {exc}") from exc
        entries.extend(sub.entries)
    manifest = save_corpus(Corpus(entries=entries), out_dir)
    click.echo(f"wrote {len(entries)} entries to {manifest}")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--window-size", default=512, show_default=True)
@click.option("--hop-length", default=160, show_default=True)
@click.option("--num-formants", default=4, show_default=True)
@click.option("--lpc-order", default=12, show_default=True)
@click.option("--pre-emphasis", default=0.97, show_default=True)
@click.option("--dump-track", type=click.Path(path_type=Path), help="Write the formant track JSON here.")
def render(in_path, out_path, window_size, hop_length, num_formants, lpc_order, pre_emphasis, dump_track) -> None:
    """Render a clip as its sparse sine-wave surrogate."""
    params = SineWaveParams(
        window_size=window_size,
        hop_length=hop_length,
        num_formants=num_formants,
        lpc_order=lpc_order,
        pre_emphasis=pre_emphasis,
    )
    clip = load_wav(in_path)
    track = analyze_formants(clip, params)
    save_wav(synthesize(track), out_path)
    if dump_track:
        dump_track.write_text(track.to_json())
    click.echo(f"rendered {in_path} -> {out_path}")


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--phi-min", default=0.5, show_default=True)
@click.option("--phi-max", default=0.8, show_default=True)
@click.option("--draw-index", default=0, show_default=True)
@click.option("--force-phi", type=float, default=None, hidden=True)
@click.pass_context
def convert(ctx, in_path, out_path, phi_min, phi_max, draw_index, force_phi) -> None:
    """Apply the randomized irreversible conversion to a clip."""
    params = ConversionParams(
        phi_min=phi_min, phi_max=phi_max, seed=derive_seed(ctx.obj["seed"], "convert")
    )
    clip = load_wav(in_path)
    out = irreversible_convert(clip, params, draw_index=draw_index, force_phi=force_phi)
    save_wav(out, out_path)
    click.echo(f"converted {in_path} -> {out_path} ({len(out)} samples)")


@main.group()
def challenge() -> None:
    """Challenge bundle stages."""


@challenge.command("gen")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--count", default=30, show_default=True)
@click.option("--n-options", default=3, show_default=True)
@click.option("--clean-decoy-prob", default=0.3, show_default=True)
@click.option("--phi-min", default=0.5, show_default=True)
@click.option("--phi-max", default=0.8, show_default=True)
@click.option("--no-convert", is_flag=True, help="Disable the irreversible conversion (keeps the sine-wave render).")
@click.pass_context
def challenge_gen(ctx, corpus_dir, out_dir, count, n_options, clean_decoy_prob, phi_min, phi_max, no_convert) -> None:
    """Build challenge bundles from a clean corpus."""
    seed = ctx.obj["seed"]
    loaded = load_corpus(corpus_dir)
    if no_convert:
        conv = ConversionParams(phi_min=1.0, phi_max=1.0, seed=derive_seed(seed, "convert"))
    else:
        conv = ConversionParams(phi_min=phi_min, phi_max=phi_max, seed=derive_seed(seed, "convert"))
    illusions = build_illusion_corpus(loaded, SineWaveParams(), conv)
    out = Path(out_dir)
    for i in range(count):
        ch = generate_challenge(
            illusions,
            n_options=n_options,
            clean_decoy_prob=clean_decoy_prob,
            rng_seed=derive_seed(seed, "challenge", i),
        )
        save_challenge(ch, out / f"{i:04d}_{ch.challenge_id}")
    click.echo(f"wrote {count} challenge bundles to {out}")


@main.command()
@click.option("--port", default=8000, show_default=True, envvar="PORT")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--pool-dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--max-attempts", default=5, show_default=True)
@click.option("--session-ttl-s", default=900.0, show_default=True)
@click.option("--allow-origin", default=None, help="CORS origin for the web client.")
@click.option("--rate-limit", default=60, show_default=True, help="Requests per minute per client; 0 disables.")
def serve(port, host, pool_dir, max_attempts, session_ttl_s, allow_origin, rate_limit) -> None:
    """Serve challenges over HTTP."""
    from .service import serve as run_service

    run_service(
        pool_dir,
        port=port,
        host=host,
        max_attempts=max_attempts,
        session_ttl_s=session_ttl_s,
        allow_origin=allow_origin,
        rate_limit_per_min=rate_limit,
    )


def _load_challenges(challenges_dir: Path):
    from .service import load_pool

    pool = load_pool(challenges_dir)
    if not pool:
        raise click.ClickException(f"no challenge bundles under {challenges_dir}")
    return pool


@main.command("eval")
@click.option("--challenges", "challenges_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--solvers", "solver_spec", default="rms,random", show_default=True)
@click.option("--json", "json_path", type=click.Path(path_type=Path), help="Also write the report as JSON.")
@click.pass_context
def eval_cmd(ctx, challenges_dir, solver_spec, json_path) -> None:
    """Run solvers over a challenge set and print bypass rates."""
    seed = ctx.obj["seed"]
    pool = _load_challenges(challenges_dir)
    solvers = []
    for name in [s.strip() for s in solver_spec.split(",") if s.strip()]:
        if name == "rms":
            solvers.append(RmsEnvelopeSolver())
        elif name == "random":
            solvers.append(RandomSolver(seed=derive_seed(seed, "random-solver")))
        else:
            raise click.UsageError(f"unknown solver: {name}")
    report = evaluate(solvers, pool, json_path=json_path)
    click.echo(report.render_table())


@main.command("rms-attack")
@click.option("--challenge", "bundle_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--json", "as_json", is_flag=True)
def rms_attack(bundle_dir, as_json) -> None:
    """Per-option envelope correlations for one challenge bundle."""
    from .challenge import load_challenge

    ch = load_challenge(bundle_dir)
    solver = RmsEnvelopeSolver()
    view = attacker_view(ch)
    corrs = solver.correlations(view)
    chosen = max(range(len(corrs)), key=lambda i: corrs[i])
    if as_json:
        click.echo(json.dumps({
            "challenge_id": ch.challenge_id,
            "correlations": [round(c, 6) for c in corrs],
            "chosen_index": chosen,
            "answer_index": ch.answer_index,
            "bypassed": chosen == ch.answer_index,
        }, sort_keys=True))
    else:
        for i, c in enumerate(corrs):
            marker = " <- chosen" if i == chosen else ""
            truth = " (correct option)" if i == ch.answer_index else ""
            click.echo(f"option {i}: corr={c:+.4f}{truth}{marker}")
        click.echo("attack " + ("succeeded" if chosen == ch.answer_index else "failed"))


if __name__ == "__main__":
    sys.exit(main())
