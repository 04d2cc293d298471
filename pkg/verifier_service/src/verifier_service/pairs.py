"""Assemble training pairs from a pipeline run directory.

Reads only the run's documented file formats: cases.jsonl (attributes),
generations.jsonl (round-0 reasoning points), annotations.jsonl (labels) and
fold_plan.json (fold per case). The rendered context matches the pipeline's
"name: value; ..." attribute serialization.
"""
from __future__ import annotations

import json
from pathlib import Path


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def render_context(attributes: dict) -> str:
    return "; ".join(f"{name}: {value}" for name, value in attributes.items())


def pairs_from_run_dir(run_dir: str | Path) -> list[dict]:
    run_dir = Path(run_dir)
    for required in ("cases.jsonl", "fold_plan.json", "generations.jsonl", "annotations.jsonl"):
        if not (run_dir / required).exists():
            raise FileNotFoundError(
                f"{run_dir / required} missing; run the pipeline's prepare/generate "
                f"steps and annotate before exporting pairs"
            )
    contexts = {
        row["id"]: render_context(row["attributes"])
        for row in _read_jsonl(run_dir / "cases.jsonl")
    }
    with open(run_dir / "fold_plan.json", "r", encoding="utf-8") as fh:
        assignment = json.load(fh)["assignment"]

    points: dict[tuple[str, int], str] = {}
    for row in _read_jsonl(run_dir / "generations.jsonl"):
        if row.get("arm") != "initial" or int(row.get("round", -1)) != 0:
            continue
        for point in row["points"]:
            points[(row["case_id"], int(point["index"]))] = point["text"]

    # latest annotation per point wins (the store is append-only)
    labels: dict[tuple[str, int], int] = {}
    for row in _read_jsonl(run_dir / "annotations.jsonl"):
        if int(row["round"]) != 0:
            continue
        labels[(row["case_id"], int(row["point_index"]))] = int(row["hallucinated"])

    pairs = []
    for (case_id, index), label in sorted(labels.items()):
        if (case_id, index) not in points or case_id not in assignment:
            continue
        pairs.append(
            {
                "context": contexts[case_id],
                "claim": points[(case_id, index)],
                "label": label,
                "fold": int(assignment[case_id]),
            }
        )
    return pairs


def write_pairs(pairs: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair, ensure_ascii=False) + "\n")
