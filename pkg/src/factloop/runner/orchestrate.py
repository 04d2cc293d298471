"""Experiment orchestration: each step reads and extends one run directory.

Raw records (cases, generations, bundles, annotations, scores, exchanges) are
the source of truth; every report table is a pure function of them, so
deleting the reports directory and re-emitting reproduces identical bytes.
"""
from __future__ import annotations

import csv
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from ..dataset import (
    CaseRecord,
    balance_sample,
    exclude_features,
    load_table,
    percentile_encode,
    to_cases,
)
from ..exceptions import FactloopError, IncompleteAnnotationError
from ..feedback import (
    FINETUNED_SLM,
    ORACLE,
    SELF_REFLECTION,
    VERIFIER,
    AnnotationRecord,
    FeedbackBundle,
    entire_content_flags,
    initial_generation,
    oracle_flags,
    probe_flags,
    resolve_annotations,
    run_multi_round,
    run_refinement,
    verifier_flags,
)
from ..lm_client import Backend
from ..parser import INVALID, Generation
from ..prompts import ENTIRE_CONTENT, SINGLE_POINT
from ..stats import (
    LabeledOutcome,
    ScoredPoint,
    aggregate_h,
    auprc,
    balanced_accuracy,
    density_bins,
    f1,
    pearson,
    risk_difference,
    weighted_cost,
    wilcoxon_rank_sum,
)
from ..verifier_gateway import FoldPlan, VerifierScore, collect_scores, plan_folds
from .config import RunConfig
from .store import ARM_INITIAL, CONFIG_SNAPSHOT, RunStore

ARM_GRANULARITY_PREFIX = "gran:"
ARM_ROUNDS_PREFIX = "rounds:"
ARM_VERIFIER_PREFIX = "verifier:"

BASELINE_LABEL = "no_feedback"


# --- preparation ---


def prepare_cases(config: RunConfig) -> list[CaseRecord]:
    """Dataset pipeline: load, exclude, percentile-encode, balance."""
    table = load_table(config.dataset_path, config.preprocess)
    table = exclude_features(table, config.preprocess.excluded_features)
    table = percentile_encode(table)
    cases = to_cases(table)
    return balance_sample(cases, seed=config.preprocess.seed,
                          per_class=config.preprocess.cases_per_class)


def write_snapshot(store: RunStore, config: RunConfig) -> None:
    store.write_json(
        CONFIG_SNAPSHOT,
        {
            "run_id": config.run_id,
            "model": config.model_label(),
            "density_bins": config.density_bins,
            "granularity": config.granularity,
            "sources": list(config.sources),
            "rounds": config.rounds,
            "fold_k": config.fold_k,
            "fold_seed": config.fold_seed,
            "seed": config.seed,
        },
    )


def read_snapshot(store: RunStore) -> dict:
    path = store.path(CONFIG_SNAPSHOT)
    if not path.exists():
        raise FactloopError(f"{path} missing; run 'prepare' first")
    return store.read_json(CONFIG_SNAPSHOT)


# --- generation ---


def _failed_generation(case: CaseRecord, round: int, error: Exception) -> Generation:
    return Generation(
        case_id=case.id,
        round=round,
        decision=INVALID,
        points=[],
        raw="",
        note=f"backend_error: {error}",
    )


def run_initial(
    store: RunStore,
    cases: Sequence[CaseRecord],
    backend: Backend,
    parallel: int = 1,
) -> dict[str, Generation]:
    """Round-0 generation for every case; failures degrade to invalid."""
    backend.set_exchange_sink(store.exchange_sink())

    def one(case: CaseRecord) -> Generation:
        try:
            return initial_generation(
                case, backend, tags={"arm": ARM_INITIAL, "case_id": case.id}
            )
        except FactloopError as exc:
            return _failed_generation(case, 0, exc)

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            generations = list(pool.map(one, cases))
    else:
        generations = [one(case) for case in cases]
    store.append_generations((g, ARM_INITIAL) for g in generations)
    return {g.case_id: g for g in generations}


# --- outcome assembly ---


def outcomes_for(
    cases: Sequence[CaseRecord],
    generations: dict[str, Generation],
    h_by_case: Optional[dict[str, int]] = None,
) -> list[LabeledOutcome]:
    out = []
    for case in cases:
        generation = generations.get(case.id)
        predicted = generation.decision if generation is not None else INVALID
        out.append(
            LabeledOutcome(
                case_id=case.id,
                predicted=predicted,
                label=case.label,
                h_rsn=None if h_by_case is None else h_by_case.get(case.id),
            )
        )
    return out


def resolved_truth(
    round0: dict[str, Generation], annotations: Sequence[AnnotationRecord]
) -> dict[str, dict[int, int]]:
    """Per-case resolved point judgments for every fully annotated case."""
    truth: dict[str, dict[int, int]] = {}
    for case_id, generation in round0.items():
        if not generation.points:
            continue
        try:
            truth[case_id] = resolve_annotations(generation, annotations)
        except IncompleteAnnotationError:
            continue
    return truth


# --- association (table 1) ---


def compute_association(
    cases: Sequence[CaseRecord],
    round0: dict[str, Generation],
    annotations: Sequence[AnnotationRecord],
    require_complete: bool = True,
) -> dict:
    with_points = [c for c in cases if round0.get(c.id) is not None and round0[c.id].points]
    truth = resolved_truth(round0, annotations)
    missing = [c.id for c in with_points if c.id not in truth]
    if missing and require_complete:
        raise IncompleteAnnotationError(
            f"association needs complete round-0 annotations; missing cases: {missing}"
        )
    usable = [c for c in with_points if c.id in truth]
    h_by_case = {c.id: aggregate_h(list(truth[c.id].values())) for c in usable}
    outcomes = outcomes_for(usable, round0, h_by_case)
    h_vec = [h_by_case[c.id] for c in usable]
    e_vec = [1 if o.misclassified() else 0 for o in outcomes]
    return {
        "n_cases": len(usable),
        "n_excluded_without_points": len(cases) - len(with_points),
        "pearson": pearson(h_vec, e_vec) if len(usable) >= 2 else None,
        "risk_difference": risk_difference(outcomes) if usable else None,
    }


# --- detection evaluation (table 2 + densities) ---


def compute_detection(
    round0: dict[str, Generation],
    annotations: Sequence[AnnotationRecord],
    score_records: Sequence[dict],
    bins: int = 10,
) -> dict[str, dict]:
    """Per-scorer AUPRC/BA/Wilcoxon and density bins over annotated points."""
    truth = resolved_truth(round0, annotations)
    annotated_points = {
        (case_id, index): value
        for case_id, per_point in truth.items()
        for index, value in per_point.items()
    }
    if not annotated_points:
        raise FactloopError("no fully annotated round-0 cases; annotate before detect-eval")

    by_scorer: dict[str, dict[tuple[str, int], float]] = {}
    for record in score_records:
        if int(record["round"]) != 0:
            continue
        key = (record["case_id"], int(record["point_index"]))
        by_scorer.setdefault(record["scorer_id"], {})[key] = float(record["prob"])

    results: dict[str, dict] = {}
    for scorer_id in sorted(by_scorer):
        scores = by_scorer[scorer_id]
        gaps = [k for k in annotated_points if k not in scores]
        if gaps:
            raise FactloopError(
                f"scorer {scorer_id}: {len(gaps)} annotated points lack scores, "
                f"e.g. {gaps[:5]}"
            )
        points = [
            ScoredPoint(prob=scores[key], truth=value)
            for key, value in sorted(annotated_points.items())
        ]
        probs_h1 = [p.prob for p in points if p.truth == 1]
        probs_h0 = [p.prob for p in points if p.truth == 0]
        p_value = (
            wilcoxon_rank_sum(probs_h1, probs_h0) if probs_h1 and probs_h0 else None
        )
        results[scorer_id] = {
            "n_points": len(points),
            "n_positive": len(probs_h1),
            "auprc": auprc(points),
            "balanced_accuracy": balanced_accuracy(points),
            "wilcoxon_p": p_value,
            "density": density_bins(points, bins),
        }
    return results


# --- scoring ---


def score_round0(
    store: RunStore,
    cases: Sequence[CaseRecord],
    round0: dict[str, Generation],
    scorers,
    k: int,
    seed: int,
) -> tuple[FoldPlan, list[VerifierScore]]:
    """Plan folds (reusing a stored plan when present) and collect scores."""
    plan_path = store.path("fold_plan.json")
    if plan_path.exists():
        plan = store.load_fold_plan()
    else:
        plan = plan_folds(cases, k=k, seed=seed)
        store.write_fold_plan(plan)
    pairs = [
        (case, round0[case.id])
        for case in cases
        if case.id in round0 and round0[case.id].points
    ]
    scores = collect_scores(plan, pairs, scorers, audit_sink=store.append_score_record)
    return plan, scores


# --- adaptive inference (table 3) ---


@dataclass
class ArmResult:
    arm: str
    ok: bool
    error: Optional[str] = None


def _refine_arm(
    store: RunStore,
    cases: Sequence[CaseRecord],
    round0: dict[str, Generation],
    arm: str,
    bundle_for: Callable[[CaseRecord, Generation], FeedbackBundle],
    backend: Backend,
    parallel: int = 1,
) -> None:
    """One refinement round for every case under one feedback arm."""

    def one(case: CaseRecord) -> tuple[Optional[FeedbackBundle], Generation]:
        generation = round0.get(case.id)
        if generation is None:
            return None, _failed_generation(case, 1, FactloopError("no round-0 generation"))
        bundle = bundle_for(case, generation)
        try:
            refined = run_refinement(
                case, generation, bundle, backend,
                tags={"arm": arm, "case_id": case.id},
            )
        except FactloopError as exc:
            return bundle, _failed_generation(case, 1, exc)
        return bundle, refined

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(one, cases))
    else:
        results = [one(case) for case in cases]
    for (bundle, _), case in zip(results, cases):
        if bundle is not None:
            store.append_bundle(bundle, arm)
    store.append_generations((refined, arm) for _, refined in results)


def run_adaptive(
    store: RunStore,
    cases: Sequence[CaseRecord],
    round0: dict[str, Generation],
    sources: Sequence[str],
    generation_backend: Backend,
    reflection_backend: Optional[Backend] = None,
    finetuned_backend: Optional[Backend] = None,
    annotations: Optional[Sequence[AnnotationRecord]] = None,
    scores: Optional[Sequence[VerifierScore]] = None,
    parallel: int = 1,
) -> list[ArmResult]:
    """Run each feedback arm; a failure in one arm never touches the others."""
    generation_backend.set_exchange_sink(store.exchange_sink())
    for extra in (reflection_backend, finetuned_backend):
        if extra is not None and extra is not generation_backend:
            extra.set_exchange_sink(store.exchange_sink())

    annotations = annotations if annotations is not None else store.load_annotations()
    scores = scores if scores is not None else store.load_scores()
    arm_plans: list[tuple[str, Callable[[CaseRecord, Generation], FeedbackBundle]]] = []
    for source in sources:
        if source == ORACLE:
            arm_plans.append(
                (ORACLE, lambda case, gen: oracle_flags(gen, annotations))
            )
        elif source == VERIFIER:
            by_scorer: dict[str, list[VerifierScore]] = {}
            for score in scores:
                by_scorer.setdefault(score.scorer_id, []).append(score)
            if not by_scorer:
                arm_plans.append((VERIFIER, _missing_scores))
            for scorer_id in sorted(by_scorer):
                arm_plans.append(
                    (
                        f"{ARM_VERIFIER_PREFIX}{scorer_id}",
                        lambda case, gen, s=by_scorer[scorer_id]: verifier_flags(gen, s),
                    )
                )
        elif source == SELF_REFLECTION:
            backend = reflection_backend or generation_backend
            arm_plans.append(
                (
                    SELF_REFLECTION,
                    lambda case, gen, b=backend: probe_flags(
                        gen, case, b, SELF_REFLECTION,
                        tags={"arm": SELF_REFLECTION, "case_id": case.id},
                    ),
                )
            )
        elif source == FINETUNED_SLM:
            if finetuned_backend is None:
                arm_plans.append((FINETUNED_SLM, _missing_finetuned))
            else:
                arm_plans.append(
                    (
                        FINETUNED_SLM,
                        lambda case, gen: probe_flags(
                            gen, case, finetuned_backend, FINETUNED_SLM,
                            tags={"arm": FINETUNED_SLM, "case_id": case.id},
                        ),
                    )
                )
        else:
            raise FactloopError(f"unknown feedback source {source!r}")

    results = []
    for arm, bundle_for in arm_plans:
        try:
            _refine_arm(store, cases, round0, arm, bundle_for, generation_backend,
                        parallel=parallel)
            results.append(ArmResult(arm=arm, ok=True))
        except FactloopError as exc:
            results.append(ArmResult(arm=arm, ok=False, error=str(exc)))
    return results


def _missing_scores(case, gen):
    raise FactloopError("verifier feedback requested but no scores are stored")


def _missing_finetuned(case, gen):
    raise FactloopError("finetuned_slm feedback requested but no backend is configured")


def compute_adaptive(
    cases: Sequence[CaseRecord],
    generations: Sequence[tuple[Generation, str]],
) -> list[dict]:
    """Table rows: the shared no-feedback baseline plus every round-1 arm."""
    round0 = {g.case_id: g for g, arm in generations if arm == ARM_INITIAL}
    rows = [_metric_row(BASELINE_LABEL, outcomes_for(cases, round0))]
    arms = sorted(
        {
            arm
            for _, arm in generations
            if arm != ARM_INITIAL
            and not arm.startswith(ARM_GRANULARITY_PREFIX)
            and not arm.startswith(ARM_ROUNDS_PREFIX)
        }
    )
    for arm in arms:
        by_case = {g.case_id: g for g, a in generations if a == arm and g.round == 1}
        rows.append(_metric_row(arm, outcomes_for(cases, by_case)))
    return rows


def _metric_row(label: str, outcomes: list[LabeledOutcome]) -> dict:
    return {
        "feedback": label,
        "f1": f1(outcomes),
        "weighted_cost": weighted_cost(outcomes),
    }


# --- granularity comparison (table 4) ---


def run_granularity_compare(
    store: RunStore,
    cases: Sequence[CaseRecord],
    round0: dict[str, Generation],
    generation_backend: Backend,
    reflection_backend: Optional[Backend] = None,
    parallel: int = 1,
) -> list[ArmResult]:
    """Self-reflection feedback at both granularities."""
    generation_backend.set_exchange_sink(store.exchange_sink())
    probe_backend = reflection_backend or generation_backend
    if probe_backend is not generation_backend:
        probe_backend.set_exchange_sink(store.exchange_sink())
    results = []
    for granularity in (ENTIRE_CONTENT, SINGLE_POINT):
        arm = f"{ARM_GRANULARITY_PREFIX}{granularity}"

        def bundle_for(case, gen, g=granularity):
            tags = {"arm": f"{ARM_GRANULARITY_PREFIX}{g}", "case_id": case.id}
            if g == ENTIRE_CONTENT:
                return entire_content_flags(
                    gen, case, backend=probe_backend, source=SELF_REFLECTION, tags=tags
                )
            return probe_flags(gen, case, probe_backend, SELF_REFLECTION, tags=tags)

        try:
            _refine_arm(store, cases, round0, arm, bundle_for, generation_backend,
                        parallel=parallel)
            results.append(ArmResult(arm=arm, ok=True))
        except FactloopError as exc:
            results.append(ArmResult(arm=arm, ok=False, error=str(exc)))
    return results


def compute_granularity(
    cases: Sequence[CaseRecord],
    generations: Sequence[tuple[Generation, str]],
) -> list[dict]:
    rows = []
    arms = sorted({arm for _, arm in generations if arm.startswith(ARM_GRANULARITY_PREFIX)})
    for arm in arms:
        by_case = {g.case_id: g for g, a in generations if a == arm and g.round == 1}
        row = _metric_row(arm[len(ARM_GRANULARITY_PREFIX):], outcomes_for(cases, by_case))
        row["granularity"] = row.pop("feedback")
        rows.append(row)
    return rows


# --- multi-round (figure data) ---


def run_multi_round_experiment(
    store: RunStore,
    cases: Sequence[CaseRecord],
    rounds: int,
    source: str,
    granularity: str,
    generation_backend: Backend,
    feedback_backend: Optional[Backend] = None,
    annotations: Optional[Sequence[AnnotationRecord]] = None,
    parallel: int = 1,
) -> str:
    """Fresh multi-round series per case; returns the arm name."""
    if rounds < 2:
        raise FactloopError("multi-round experiments need rounds >= 2")
    generation_backend.set_exchange_sink(store.exchange_sink())
    if feedback_backend is not None and feedback_backend is not generation_backend:
        feedback_backend.set_exchange_sink(store.exchange_sink())
    arm = f"{ARM_ROUNDS_PREFIX}{source}:{granularity}"
    annotations = annotations if annotations is not None else store.load_annotations()

    def one(case: CaseRecord) -> tuple[list[Generation], list[FeedbackBundle]]:
        bundles: list[FeedbackBundle] = []
        try:
            series = run_multi_round(
                case,
                rounds,
                granularity,
                source,
                generation_backend,
                feedback_backend=feedback_backend,
                annotations=annotations,
                tags={"arm": arm, "case_id": case.id},
                on_bundle=bundles.append,
            )
        except FactloopError as exc:
            series = [_failed_generation(case, r, exc) for r in range(rounds + 1)]
        return series, bundles

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(one, cases))
    else:
        results = [one(case) for case in cases]
    for series, bundles in results:
        store.append_generations((g, arm) for g in series)
        for bundle in bundles:
            store.append_bundle(bundle, arm)
    return arm


def compute_rounds(
    cases: Sequence[CaseRecord],
    generations: Sequence[tuple[Generation, str]],
) -> dict[str, list[dict]]:
    """Per-round F1/cost series for every multi-round arm."""
    series: dict[str, list[dict]] = {}
    arms = sorted({arm for _, arm in generations if arm.startswith(ARM_ROUNDS_PREFIX)})
    for arm in arms:
        arm_gens = [g for g, a in generations if a == arm]
        max_round = max((g.round for g in arm_gens), default=-1)
        rows = []
        for r in range(max_round + 1):
            by_case = {g.case_id: g for g in arm_gens if g.round == r}
            row = _metric_row(str(r), outcomes_for(cases, by_case))
            row["round"] = int(row.pop("feedback"))
            rows.append(row)
        series[arm[len(ARM_ROUNDS_PREFIX):]] = rows
    return series


# --- reports ---


def _fmt_pct(value: Optional[float]) -> str:
    return "NA" if value is None else f"{value:.2f}"


def _fmt_float(value: Optional[float], digits: int = 6) -> str:
    return "NA" if value is None else f"{value:.{digits}f}"


def _fmt_p(value: Optional[float]) -> str:
    return "NA" if value is None else f"{value:.6g}"


def _safe_name(name: str) -> str:
    return re.sub(r"[^0-9A-Za-z_.-]", "_", name)


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def emit_report(store: RunStore, bins: Optional[int] = None) -> dict:
    """(Re)compute every table the raw records can support.

    Returns the manifest; tables whose inputs are absent are marked pending.
    Everything here is derived from raw records only, so re-running after
    deleting the reports directory reproduces identical files.
    """
    snapshot = read_snapshot(store)
    model = snapshot.get("model", "model")
    bins = bins if bins is not None else int(snapshot.get("density_bins", 10))
    report_dir = store.report_dir
    report_dir.mkdir(parents=True, exist_ok=True)

    cases = store.load_cases()
    generations = store.load_generations()
    round0 = {g.case_id: g for g, arm in generations if arm == ARM_INITIAL}
    annotations = store.load_annotations()
    score_records = store.load_score_records()

    manifest: dict = {
        "run_id": snapshot.get("run_id"),
        "model": model,
        "inputs": {
            "cases": len(cases),
            "generations": len(generations),
            "annotations": len(annotations),
            "scores": len(score_records),
        },
        "tables": {},
    }

    def mark(name: str, status: str, **extra) -> None:
        manifest["tables"][name] = {"status": status, **extra}

    # baseline (no-feedback) metrics
    if round0:
        outcomes = outcomes_for(cases, round0)
        baseline = {
            "model": model,
            "f1": f1(outcomes),
            "weighted_cost": weighted_cost(outcomes),
            "n_cases": len(cases),
        }
        with open(report_dir / "baseline.json", "w", encoding="utf-8") as fh:
            json.dump(baseline, fh, indent=2, sort_keys=True)
            fh.write("\n")
        mark("baseline", "written")
    else:
        mark("baseline", "pending", reason="no round-0 generations")

    # table 1: association
    try:
        association = compute_association(cases, round0, annotations) if round0 else None
    except IncompleteAnnotationError:
        association = None
    if association is not None and association["n_cases"] >= 2:
        _write_csv(
            report_dir / "table1.csv",
            ["model", "n_cases", "pearson", "risk_difference"],
            [[model, str(association["n_cases"]),
              _fmt_float(association["pearson"]),
              _fmt_float(association["risk_difference"])]],
        )
        with open(report_dir / "table1.json", "w", encoding="utf-8") as fh:
            json.dump({"model": model, **association}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        mark("table1", "written")
    else:
        mark("table1", "pending", reason="round-0 annotations incomplete")

    # table 2: detection + densities
    detection: Optional[dict] = None
    if score_records and annotations and round0:
        try:
            detection = compute_detection(round0, annotations, score_records, bins=bins)
        except FactloopError:
            detection = None
    if detection:
        rows = []
        json_rows = {}
        for scorer_id, result in detection.items():
            rows.append(
                [model, scorer_id, str(result["n_points"]),
                 _fmt_pct(result["auprc"]), _fmt_pct(result["balanced_accuracy"]),
                 _fmt_p(result["wilcoxon_p"])]
            )
            json_rows[scorer_id] = {
                k: v for k, v in result.items() if k != "density"
            }
            density = result["density"]
            _write_csv(
                report_dir / f"density_{_safe_name(scorer_id)}.csv",
                ["bin_low", "bin_high", "freq_h0", "freq_h1"],
                [
                    [f"{r['bin_low']:.6f}", f"{r['bin_high']:.6f}",
                     f"{r['freq_h0']:.6f}", f"{r['freq_h1']:.6f}"]
                    for r in density.rows()
                ],
            )
        _write_csv(
            report_dir / "table2.csv",
            ["model", "scorer", "n_points", "auprc", "balanced_accuracy", "wilcoxon_p"],
            rows,
        )
        with open(report_dir / "table2.json", "w", encoding="utf-8") as fh:
            json.dump({"model": model, "scorers": json_rows}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        mark("table2", "written", scorers=sorted(detection))
    else:
        mark("table2", "pending", reason="needs annotations and scores")

    # table 3: adaptive arms
    adaptive_rows = compute_adaptive(cases, generations) if round0 else []
    if len(adaptive_rows) > 1:
        _write_csv(
            report_dir / "table3.csv",
            ["model", "feedback", "f1", "weighted_cost"],
            [[model, r["feedback"], _fmt_pct(r["f1"]), str(r["weighted_cost"])]
             for r in adaptive_rows],
        )
        with open(report_dir / "table3.json", "w", encoding="utf-8") as fh:
            json.dump({"model": model, "rows": adaptive_rows}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        mark("table3", "written", arms=[r["feedback"] for r in adaptive_rows])
    else:
        mark("table3", "pending", reason="no feedback arms recorded")

    # table 4: granularity comparison
    granularity_rows = compute_granularity(cases, generations)
    if granularity_rows:
        _write_csv(
            report_dir / "table4.csv",
            ["model", "granularity", "f1", "weighted_cost"],
            [[model, r["granularity"], _fmt_pct(r["f1"]), str(r["weighted_cost"])]
             for r in granularity_rows],
        )
        with open(report_dir / "table4.json", "w", encoding="utf-8") as fh:
            json.dump({"model": model, "rows": granularity_rows}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        mark("table4", "written")
    else:
        mark("table4", "pending", reason="no granularity arms recorded")

    # per-round series
    round_series = compute_rounds(cases, generations)
    if round_series:
        rows = []
        for arm_label, series in sorted(round_series.items()):
            for r in series:
                rows.append([model, arm_label, str(r["round"]),
                             _fmt_pct(r["f1"]), str(r["weighted_cost"])])
        _write_csv(
            report_dir / "rounds.csv",
            ["model", "arm", "round", "f1", "weighted_cost"],
            rows,
        )
        with open(report_dir / "rounds.json", "w", encoding="utf-8") as fh:
            json.dump({"model": model, "series": round_series}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        mark("rounds", "written")
    else:
        mark("rounds", "pending", reason="no multi-round arms recorded")

    with open(report_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def replay_verify(store: RunStore) -> list[str]:
    """Recompute all reports in place and list files whose bytes changed."""
    report_dir = store.report_dir
    before: dict[str, bytes] = {}
    if report_dir.exists():
        for path in sorted(report_dir.glob("*")):
            before[path.name] = path.read_bytes()
    emit_report(store)
    changed = []
    after_names = {p.name for p in report_dir.glob("*")}
    for name in sorted(set(before) | after_names):
        new = (report_dir / name).read_bytes() if name in after_names else None
        if before.get(name) != new:
            changed.append(name)
    return changed
