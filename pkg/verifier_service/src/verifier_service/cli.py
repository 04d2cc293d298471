"""Command line for training and serving scorer artifacts."""
from __future__ import annotations

import sys
from pathlib import Path

import click

from .pairs import pairs_from_run_dir, write_pairs
from .scoring import load_scorer
from .server import ScorerServer
from .training import TrainSpec, load_pairs, train_fold, write_lexical_artifact


@click.group()
def main():
    """Fine-tune and serve factual-error scorers."""


@main.command("make-pairs")
@click.option("--run-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def make_pairs(run_dir, out):
    """Export (context, claim, label, fold) pairs from a pipeline run."""
    pairs = pairs_from_run_dir(run_dir)
    if not pairs:
        click.echo("no annotated round-0 points found", err=True)
        sys.exit(1)
    write_pairs(pairs, out)
    click.echo(f"wrote {len(pairs)} pairs to {out}")


@main.command()
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, default=3, show_default=True)
@click.option("--held-out", type=int, required=True, help="Fold to hold out of training.")
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--epochs", type=int, default=6, show_default=True)
@click.option("--learning-rate", type=float, default=3e-3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--scorer-id", default="tiny-encoder", show_default=True)
def train(pairs_path, k, held_out, out, epochs, learning_rate, seed, scorer_id):
    """Fine-tune one artifact whose training folds exclude --held-out."""
    spec = TrainSpec(
        k=k,
        trained_on_folds=[f for f in range(k) if f != held_out],
        epochs=epochs,
        learning_rate=learning_rate,
        seed=seed,
        scorer_id=scorer_id,
    )
    artifact = train_fold(spec, load_pairs(pairs_path), out)
    click.echo(f"trained artifact at {artifact} (held-out fold {held_out})")


@main.command("train-all")
@click.option("--pairs", "pairs_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", type=int, default=3, show_default=True)
@click.option("--out-root", required=True, type=click.Path(file_okay=False))
@click.option("--epochs", type=int, default=6, show_default=True)
@click.option("--learning-rate", type=float, default=3e-3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--scorer-id", default="tiny-encoder", show_default=True)
def train_all(pairs_path, k, out_root, epochs, learning_rate, seed, scorer_id):
    """One artifact per fold: fold-f/ holds fold f out of training."""
    pairs = load_pairs(pairs_path)
    for held_out in range(k):
        spec = TrainSpec(
            k=k,
            trained_on_folds=[f for f in range(k) if f != held_out],
            epochs=epochs,
            learning_rate=learning_rate,
            seed=seed,
            scorer_id=scorer_id,
        )
        artifact = train_fold(spec, pairs, Path(out_root) / f"fold-{held_out}")
        click.echo(f"trained {artifact}")


@main.command()
@click.option("--artifact", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=9100, show_default=True)
def serve(artifact, host, port):
    """Serve one artifact under the scoring protocol."""
    scorer = load_scorer(artifact)
    server = ScorerServer(scorer, host=host, port=port)
    click.echo(f"scoring service for {artifact} listening on {server.url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        server.stop()


@main.command()
@click.option("--out", required=True, type=click.Path(file_okay=False))
@click.option("--scorer-id", default="lexical-overlap", show_default=True)
def pretrained(out, scorer_id):
    """Write a no-finetune artifact using entailment-style lexical overlap."""
    artifact = write_lexical_artifact(out, scorer_id=scorer_id)
    click.echo(f"wrote pre-trained artifact at {artifact}")


if __name__ == "__main__":
    main()
