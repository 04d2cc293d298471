"""Append-only persistence for one run directory.

Every record type is a JSON-lines file; reports derive from these raw records
and can always be recomputed byte-identically. A file lock enforces the
single-writer rule; readers (the annotation API's GETs) need no lock.
"""
from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Iterable, Iterator, Optional

from filelock import FileLock, Timeout

from ..dataset import CaseRecord, read_cases, write_cases
from ..exceptions import ConfigurationError, FactloopError
from ..feedback import AnnotationRecord, FeedbackBundle
from ..parser import Generation, ReasoningPoint
from ..verifier_gateway import FoldPlan, VerifierScore

CASES = "cases.jsonl"
GENERATIONS = "generations.jsonl"
BUNDLES = "bundles.jsonl"
ANNOTATIONS = "annotations.jsonl"
SCORES = "scores.jsonl"
EXCHANGES = "exchanges.jsonl"
FOLD_PLAN = "fold_plan.json"
CONFIG_SNAPSHOT = "config.snapshot.json"
REPORT_DIR = "reports"

ARM_INITIAL = "initial"


def generation_to_record(generation: Generation, arm: str) -> dict:
    return {
        "case_id": generation.case_id,
        "arm": arm,
        "round": generation.round,
        "decision": generation.decision,
        "points": [{"index": p.index, "text": p.text} for p in generation.points],
        "raw": generation.raw,
        "note": generation.note,
    }


def generation_from_record(record: dict) -> Generation:
    return Generation(
        case_id=record["case_id"],
        round=int(record["round"]),
        decision=record["decision"],
        points=[ReasoningPoint(index=int(p["index"]), text=p["text"]) for p in record["points"]],
        raw=record.get("raw", ""),
        note=record.get("note"),
    )


class RunStore:
    """Paths, JSONL IO and the writer lock for one run directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._write_lock = threading.Lock()
        self._file_lock: Optional[FileLock] = None

    def ensure(self) -> "RunStore":
        self.root.mkdir(parents=True, exist_ok=True)
        return self

    def path(self, name: str) -> Path:
        return self.root / name

    @property
    def report_dir(self) -> Path:
        return self.root / REPORT_DIR

    def acquire_writer_lock(self, timeout: float = 5.0) -> None:
        self.ensure()
        if self._file_lock is None:
            self._file_lock = FileLock(str(self.root / ".lock"))
        try:
            self._file_lock.acquire(timeout=timeout)
        except Timeout as exc:
            raise ConfigurationError(
                f"run directory {self.root} is locked by another writer"
            ) from exc

    def release_writer_lock(self) -> None:
        if self._file_lock is not None and self._file_lock.is_locked:
            self._file_lock.release()

    # --- generic JSONL ---

    def append_jsonl(self, name: str, record: dict) -> None:
        with self._write_lock:
            with open(self.path(name), "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def extend_jsonl(self, name: str, records: Iterable[dict]) -> None:
        with self._write_lock:
            with open(self.path(name), "a", encoding="utf-8") as fh:
                for record in records:
                    fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def read_jsonl(self, name: str) -> Iterator[dict]:
        path = self.path(name)
        if not path.exists():
            return
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    yield json.loads(line)

    def write_json(self, name: str, obj: dict) -> None:
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump(obj, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")

    def read_json(self, name: str) -> dict:
        with open(self.path(name), "r", encoding="utf-8") as fh:
            return json.load(fh)

    # --- typed accessors ---

    def write_cases(self, cases: list[CaseRecord]) -> None:
        write_cases(cases, self.path(CASES))

    def load_cases(self) -> list[CaseRecord]:
        path = self.path(CASES)
        if not path.exists():
            raise FactloopError(f"{path} missing; run 'prepare' first")
        return read_cases(path)

    def append_generations(self, generations: Iterable[tuple[Generation, str]]) -> None:
        self.extend_jsonl(GENERATIONS, (generation_to_record(g, arm) for g, arm in generations))

    def load_generations(self, arm: Optional[str] = None) -> list[tuple[Generation, str]]:
        out = []
        for record in self.read_jsonl(GENERATIONS):
            if arm is None or record["arm"] == arm:
                out.append((generation_from_record(record), record["arm"]))
        return out

    def load_round0(self) -> dict[str, Generation]:
        return {g.case_id: g for g, _ in self.load_generations(arm=ARM_INITIAL)}

    def append_bundle(self, bundle: FeedbackBundle, arm: str) -> None:
        record = bundle.to_record()
        record["arm"] = arm
        self.append_jsonl(BUNDLES, record)

    def append_annotation(self, annotation: AnnotationRecord) -> None:
        self.append_jsonl(ANNOTATIONS, annotation.to_record())

    def load_annotations(self) -> list[AnnotationRecord]:
        out = []
        for record in self.read_jsonl(ANNOTATIONS):
            out.append(
                AnnotationRecord(
                    case_id=record["case_id"],
                    round=int(record["round"]),
                    point_index=int(record["point_index"]),
                    hallucinated=int(record["hallucinated"]),
                    annotator=record.get("annotator", ""),
                    timestamp=record.get("timestamp", ""),
                )
            )
        return out

    def append_score_record(self, record: dict) -> None:
        self.append_jsonl(SCORES, record)

    def load_score_records(self) -> list[dict]:
        return list(self.read_jsonl(SCORES))

    def load_scores(self) -> list[VerifierScore]:
        return [
            VerifierScore(
                case_id=r["case_id"],
                round=int(r["round"]),
                point_index=int(r["point_index"]),
                prob=float(r["prob"]),
                scorer_id=r["scorer_id"],
                trained_on_folds=frozenset(int(f) for f in r["trained_on_folds"]),
            )
            for r in self.load_score_records()
        ]

    def write_fold_plan(self, plan: FoldPlan) -> None:
        self.write_json(FOLD_PLAN, plan.to_json())

    def load_fold_plan(self) -> FoldPlan:
        path = self.path(FOLD_PLAN)
        if not path.exists():
            raise FactloopError(f"{path} missing; run 'score' first")
        return FoldPlan.from_json(self.read_json(FOLD_PLAN))

    def exchange_sink(self):
        """Sink for lm_client exchanges, appended to the run log."""

        def sink(exchange) -> None:
            self.append_jsonl(EXCHANGES, exchange.to_record())

        return sink

    def load_exchanges(self) -> list[dict]:
        return list(self.read_jsonl(EXCHANGES))
