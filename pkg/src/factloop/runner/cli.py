"""Command-line interface: each subcommand reads and extends one run directory."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from ..exceptions import FactloopError
from ..feedback import SELF_REFLECTION
from ..verifier_gateway import HttpScorer, import_scores
from . import orchestrate
from .api import AnnotationServer
from .config import (
    FINETUNED_BACKEND,
    GENERATION_BACKEND,
    SELF_REFLECTION_BACKEND,
    load_run_config,
    resolve_backend,
)
from .store import RunStore

_config_option = click.option(
    "--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False),
    help="Run configuration (YAML).",
)
_run_dir_option = click.option(
    "--run-dir", "run_dir", required=True, type=click.Path(file_okay=False),
    help="Run directory holding raw records and reports.",
)
_seed_option = click.option("--seed", type=int, default=None, help="Override the config seed.")


def _open(config_path: str, run_dir: str, seed: int | None):
    config = load_run_config(config_path)
    if seed is not None:
        config.seed = seed
        config.preprocess.seed = seed
        config.fold_seed = seed
    store = RunStore(run_dir).ensure()
    return config, store


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


@click.group()
def main():
    """Credit-classification runs with factual-error feedback loops."""


@main.command()
@_config_option
@_run_dir_option
@_seed_option
def prepare(config_path, run_dir, seed):
    """Load, preprocess and balance the dataset into the run directory."""
    config, store = _open(config_path, run_dir, seed)
    store.acquire_writer_lock()
    try:
        cases = orchestrate.prepare_cases(config)
        store.write_cases(cases)
        orchestrate.write_snapshot(store, config)
        from ..verifier_gateway import plan_folds

        store.write_fold_plan(plan_folds(cases, k=config.fold_k, seed=config.fold_seed))
        click.echo(f"prepared {len(cases)} balanced cases -> {store.path('cases.jsonl')}")
    except FactloopError as exc:
        _fail(exc)
    finally:
        store.release_writer_lock()


@main.command()
@_config_option
@_run_dir_option
@click.option("--parallel", type=int, default=None, help="Concurrent cases (default: backend bound).")
def generate(config_path, run_dir, parallel):
    """Round-0 generations plus the no-feedback baseline metrics."""
    config, store = _open(config_path, run_dir, None)
    store.acquire_writer_lock()
    try:
        cases = store.load_cases()
        backend = resolve_backend(config, GENERATION_BACKEND)
        if parallel is None:
            spec = config.backends[GENERATION_BACKEND]
            parallel = spec.http.max_parallel if spec.kind == "http" else 1
        round0 = orchestrate.run_initial(store, cases, backend, parallel=parallel)
        manifest = orchestrate.emit_report(store)
        baseline = manifest["tables"].get("baseline", {})
        click.echo(f"generated round 0 for {len(round0)} cases (baseline: {baseline.get('status')})")
    except FactloopError as exc:
        _fail(exc)
    finally:
        store.release_writer_lock()


@main.command("serve-annotate")
@_config_option
@_run_dir_option
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve_annotate(config_path, run_dir, host, port):
    """Serve the annotation API (and UI assets, if configured) until interrupted."""
    config, store = _open(config_path, run_dir, None)
    store.acquire_writer_lock()
    try:
        server = AnnotationServer(
            store,
            host=host or config.api.host,
            port=port if port is not None else config.api.port,
            token=config.api.token,
            static_dir=config.api.static_dir,
            display_arm=config.api.display_arm,
        )
    except FactloopError as exc:
        store.release_writer_lock()
        _fail(exc)
        return
    click.echo(f"annotation API listening on {server.url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
        store.release_writer_lock()


@main.command()
@_config_option
@_run_dir_option
def score(config_path, run_dir):
    """Plan folds and collect (or import) verifier scores for round 0."""
    config, store = _open(config_path, run_dir, None)
    store.acquire_writer_lock()
    try:
        cases = store.load_cases()
        round0 = store.load_round0()
        live = [HttpScorer(s.base_url) for s in config.scorers if s.kind == "http"]
        files = [s.path for s in config.scorers if s.kind == "file"]
        if not live and not files:
            raise FactloopError("no scorers configured (http endpoints or score files)")
        total = 0
        if live:
            _, scores = orchestrate.score_round0(
                store, cases, round0, live, k=config.fold_k, seed=config.fold_seed
            )
            total += len(scores)
        if files:
            plan_path = store.path("fold_plan.json")
            if not plan_path.exists():
                from ..verifier_gateway import plan_folds

                store.write_fold_plan(plan_folds(cases, k=config.fold_k, seed=config.fold_seed))
            plan = store.load_fold_plan()
            for path in files:
                scores = import_scores(path, plan)
                for s in scores:
                    store.append_score_record(s.to_record(plan.fold_of(s.case_id)))
                total += len(scores)
        click.echo(f"collected {total} verifier scores")
    except FactloopError as exc:
        _fail(exc)
    finally:
        store.release_writer_lock()


@main.command()
@_config_option
@_run_dir_option
def associate(config_path, run_dir):
    """Association analysis between hallucinated reasoning and misclassification."""
    config, store = _open(config_path, run_dir, None)
    store.acquire_writer_lock()
    try:
        cases = store.load_cases()
        round0 = store.load_round0()
        result = orchestrate.compute_association(cases, round0, store.load_annotations())
        orchestrate.emit_report(store)
        click.echo(json.dumps(result, indent=2, sort_keys=True))
    except FactloopError as exc:
        _fail(exc)
    finally:
        store.release_writer_lock()


@main.command("detect-eval")
@_config_option
@_run_dir_option
@click.option("--bins", type=int, default=None, help="Density histogram bins.")
def detect_eval(config_path, run_dir, bins):
    """Verifier detection metrics (AUPRC, BA, Wilcoxon) plus density exports."""
    config, store = _open(config_path, run_dir, None)
    store.acquire_writer_lock()
    try:
        round0 = store.load_round0()
        results = orchestrate.compute_detection(
            round0,
            store.load_annotations(),
            store.load_score_records(),
            bins=bins or config.density_bins,
        )
        orchestrate.emit_report(store, bins=bins)
        for scorer_id, row in results.items():
            click.echo(
                f"{scorer_id}: AUPRC={row['auprc']:.2f} BA={row['balanced_accuracy']:.2f} "
                f"p={row['wilcoxon_p']:.3g} over {row['n_points']} points"
            )
    except FactloopError as exc:
        _fail(exc)
    finally:
        store.release_writer_lock()


@main.command()
@_config_option
@_run_dir_option
@click.option("--sources", default=None, help="Comma-separated override of feedback sources.")
@click.option("--parallel", type=int, default=1)
def adapt(config_path, run_dir, sources, parallel):
    """Refinement arms per feedback source; emits the comparison table."""
    config, store = _open(config_path, run_dir, None)
    store.acquire_writer_lock()
    try:
        cases = store.load_cases()
        round0 = store.load_round0()
        if not round0:
            raise FactloopError("no round-0 generations; run 'generate' first")
        cache = {}
        generation_backend = resolve_backend(config, GENERATION_BACKEND, cache)
        reflection_backend = resolve_backend(config, SELF_REFLECTION_BACKEND, cache)
        finetuned_backend = None
        if FINETUNED_BACKEND in config.backends:
            finetuned_backend = resolve_backend(config, FINETUNED_BACKEND, cache)
        arm_sources = [s.strip() for s in sources.split(",")] if sources else config.sources
        results = orchestrate.run_adaptive(
            store,
            cases,
            round0,
            arm_sources,
            generation_backend,
            reflection_backend=reflection_backend,
            finetuned_backend=finetuned_backend,
            parallel=parallel,
        )
        orchestrate.emit_report(store)
        for result in results:
            status = "ok" if result.ok else f"FAILED: {result.error}"
            click.echo(f"arm {result.arm}: {status}")
    except FactloopError as exc:
        _fail(exc)
    finally:
        store.release_writer_lock()


@main.command("compare-granularity")
@_config_option
@_run_dir_option
@click.option("--parallel", type=int, default=1)
def compare_granularity(config_path, run_dir, parallel):
    """Self-reflection feedback at single-point vs entire-content granularity."""
    config, store = _open(config_path, run_dir, None)
    store.acquire_writer_lock()
    try:
        cases = store.load_cases()
        round0 = store.load_round0()
        cache = {}
        generation_backend = resolve_backend(config, GENERATION_BACKEND, cache)
        reflection_backend = resolve_backend(config, SELF_REFLECTION_BACKEND, cache)
        results = orchestrate.run_granularity_compare(
            store, cases, round0, generation_backend,
            reflection_backend=reflection_backend, parallel=parallel,
        )
        orchestrate.emit_report(store)
        for result in results:
            status = "ok" if result.ok else f"FAILED: {result.error}"
            click.echo(f"arm {result.arm}: {status}")
    except FactloopError as exc:
        _fail(exc)
    finally:
        store.release_writer_lock()


@main.command()
@_config_option
@_run_dir_option
@click.option("--rounds", "rounds_", type=int, default=None, help="Refinement rounds (>= 2).")
@click.option("--source", default=None, help="Feedback source for the series.")
@click.option("--parallel", type=int, default=1)
def rounds(config_path, run_dir, rounds_, source, parallel):
    """Multi-round adaptive inference series at entire-content granularity."""
    config, store = _open(config_path, run_dir, None)
    store.acquire_writer_lock()
    try:
        cases = store.load_cases()
        cache = {}
        generation_backend = resolve_backend(config, GENERATION_BACKEND, cache)
        reflection_backend = resolve_backend(config, SELF_REFLECTION_BACKEND, cache)
        arm = orchestrate.run_multi_round_experiment(
            store,
            cases,
            rounds_ or config.rounds,
            source or config.rounds_source or SELF_REFLECTION,
            "entire_content",
            generation_backend,
            feedback_backend=reflection_backend,
            parallel=parallel,
        )
        orchestrate.emit_report(store)
        click.echo(f"multi-round arm {arm} complete")
    except FactloopError as exc:
        _fail(exc)
    finally:
        store.release_writer_lock()


@main.command()
@_run_dir_option
@click.option("--verify-replay", is_flag=True, help="Recompute and fail if any report changed.")
def report(run_dir, verify_replay):
    """(Re)emit every report table from the raw records."""
    store = RunStore(run_dir).ensure()
    store.acquire_writer_lock()
    try:
        if verify_replay:
            changed = orchestrate.replay_verify(store)
            if changed:
                click.echo(f"replay mismatch in: {', '.join(changed)}", err=True)
                sys.exit(2)
            click.echo("replay verified: all report files reproduced byte-identically")
        else:
            manifest = orchestrate.emit_report(store)
            for name, info in sorted(manifest["tables"].items()):
                click.echo(f"{name}: {info['status']}")
    except FactloopError as exc:
        _fail(exc)
    finally:
        store.release_writer_lock()


if __name__ == "__main__":
    main()
