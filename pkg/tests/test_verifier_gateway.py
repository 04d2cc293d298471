import json
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from factloop.dataset import CaseRecord
from factloop.exceptions import (
    ConfigurationError,
    ContractViolation,
    LeakageError,
    ProtocolError,
    TableParseError,
)
from factloop.parser import Generation, ReasoningPoint
from factloop.stats import ScoredPoint, auprc
from factloop.verifier_gateway import (
    CallableScorer,
    FoldPlan,
    audit_leakage,
    collect_scores,
    import_scores,
    plan_folds,
    threshold_predict,
)


def make_cases(n_pos, n_neg):
    cases = []
    for i in range(n_pos):
        cases.append(CaseRecord(id=f"p{i:03d}", attributes=(("a", str(i)),), label=1))
    for i in range(n_neg):
        cases.append(CaseRecord(id=f"n{i:03d}", attributes=(("a", str(i)),), label=0))
    return cases


def make_generation(case_id, texts, round=0):
    points = [ReasoningPoint(index=i + 1, text=t) for i, t in enumerate(texts)]
    return Generation(case_id=case_id, round=round, decision=1, points=points, raw="")


def fold_scorers(k=3, prob_fn=None):
    prob_fn = prob_fn or (lambda context, claim, fold: 0.0)
    return [
        CallableScorer(
            prob_fn,
            trained_on_folds=[f for f in range(k) if f != held_out],
            scorer_id="mock-encoder",
        )
        for held_out in range(k)
    ]


class TestPlanFolds:
    def test_hundred_cases_three_folds(self):
        plan = plan_folds(make_cases(50, 50), k=3, seed=1)
        sizes = Counter(plan.assignment.values())
        assert sorted(sizes.values()) == [33, 33, 34]
        cases = {c.id: c for c in make_cases(50, 50)}
        for fold in range(3):
            members = [cid for cid, f in plan.assignment.items() if f == fold]
            labels = Counter(cases[cid].label for cid in members)
            assert abs(labels[0] - labels[1]) <= 1

    def test_k1_degenerate(self):
        plan = plan_folds(make_cases(3, 0), k=1, seed=0)
        assert set(plan.assignment.values()) == {0}

    def test_same_seed_identical(self):
        cases = make_cases(20, 20)
        assert plan_folds(cases, 3, seed=5) == plan_folds(cases, 3, seed=5)

    def test_order_independent(self):
        cases = make_cases(20, 20)
        shuffled = list(reversed(cases))
        assert plan_folds(cases, 3, seed=5).assignment == plan_folds(shuffled, 3, seed=5).assignment

    def test_k_exceeding_cases(self):
        with pytest.raises(ConfigurationError):
            plan_folds(make_cases(1, 1), k=3, seed=0)

    def test_missing_label_rejected_for_stratification(self):
        with pytest.raises(ConfigurationError):
            plan_folds(make_cases(4, 0), k=2, seed=0)


class TestThreshold:
    def test_boundary_inclusive(self):
        assert threshold_predict(0.5) == 1

    def test_just_below(self):
        assert threshold_predict(0.49999) == 0

    def test_zero(self):
        assert threshold_predict(0.0) == 0

    def test_out_of_range(self):
        with pytest.raises(ContractViolation):
            threshold_predict(1.7)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, a, b):
        low, high = sorted((a, b))
        assert threshold_predict(low) <= threshold_predict(high)


class TestCollectScores:
    def test_trained_on_folds_excludes_case_fold(self):
        cases = make_cases(6, 6)
        plan = plan_folds(cases, k=3, seed=2)
        case = cases[0]
        pairs = [(case, make_generation(case.id, ["point one.", "point two."]))]
        scores = collect_scores(plan, pairs, fold_scorers())
        assert len(scores) == 2
        fold = plan.fold_of(case.id)
        for score in scores:
            assert score.trained_on_folds == frozenset({0, 1, 2} - {fold})

    def test_out_of_range_prob_is_protocol_error(self):
        cases = make_cases(3, 3)
        plan = plan_folds(cases, k=3, seed=0)
        bad = fold_scorers(prob_fn=lambda *a: 1.7)
        pairs = [(cases[0], make_generation(cases[0].id, ["p."]))]
        with pytest.raises(ProtocolError):
            collect_scores(plan, pairs, bad)

    def test_perfect_scorer_reaches_auprc_100_downstream(self):
        cases = make_cases(6, 6)
        plan = plan_folds(cases, k=3, seed=0)
        truth = {}
        pairs = []
        for i, case in enumerate(cases):
            texts = ["clean statement.", "made-up HALLUC statement."] if i % 2 else ["clean statement."]
            pairs.append((case, make_generation(case.id, texts)))
            for j, t in enumerate(texts, start=1):
                truth[(case.id, j)] = 1 if "HALLUC" in t else 0
        scorers = fold_scorers(prob_fn=lambda ctx, claim, fold: 1.0 if "HALLUC" in claim else 0.0)
        scores = collect_scores(plan, pairs, scorers)
        points = [
            ScoredPoint(prob=s.prob, truth=truth[(s.case_id, s.point_index)]) for s in scores
        ]
        assert auprc(points) == pytest.approx(100.0)

    def test_audit_log_has_zero_violations(self):
        cases = make_cases(10, 10)
        plan = plan_folds(cases, k=3, seed=3)
        pairs = [(c, make_generation(c.id, ["a.", "b."])) for c in cases]
        audit_rows = []
        collect_scores(plan, pairs, fold_scorers(), audit_sink=audit_rows.append)
        assert len(audit_rows) == 40
        assert audit_leakage(plan, audit_rows) == []

    def test_audit_detects_corruption(self):
        cases = make_cases(4, 4)
        plan = plan_folds(cases, k=2, seed=0)
        row = {
            "case_id": cases[0].id,
            "trained_on_folds": [plan.fold_of(cases[0].id)],
        }
        violations = audit_leakage(plan, [row])
        assert len(violations) == 1
        assert cases[0].id in violations[0]

    def test_no_scorer_for_fold(self):
        cases = make_cases(3, 3)
        plan = plan_folds(cases, k=3, seed=0)
        only_two = fold_scorers()[:2]
        with pytest.raises(ConfigurationError):
            collect_scores(plan, [], only_two)

    def test_single_pretrained_scorer_covers_all_folds(self):
        cases = make_cases(3, 3)
        plan = plan_folds(cases, k=3, seed=0)
        scorer = CallableScorer(lambda *a: 0.2, trained_on_folds=[], scorer_id="pretrained")
        pairs = [(cases[0], make_generation(cases[0].id, ["x."]))]
        scores = collect_scores(plan, pairs, scorer)
        assert scores[0].trained_on_folds == frozenset()


class TestImportScores:
    def write_scores(self, tmp_path, rows):
        path = tmp_path / "scores.jsonl"
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
        return path

    def base_row(self, **overrides):
        row = {
            "case_id": "p000",
            "round": 0,
            "point_index": 1,
            "prob": 0.7,
            "scorer_id": "enc",
            "trained_on_folds": [1, 2],
        }
        row.update(overrides)
        return row

    def plan(self):
        return FoldPlan(k=3, seed=0, assignment={"p000": 0, "n000": 1})

    def test_valid_six_lines(self, tmp_path):
        rows = [self.base_row(point_index=i + 1) for i in range(6)]
        path = self.write_scores(tmp_path, rows)
        assert len(import_scores(path, self.plan())) == 6

    def test_leakage_names_case(self, tmp_path):
        path = self.write_scores(tmp_path, [self.base_row(trained_on_folds=[0, 1])])
        with pytest.raises(LeakageError) as err:
            import_scores(path, self.plan())
        assert "p000" in str(err.value)

    def test_missing_prob_field_names_line(self, tmp_path):
        row = self.base_row()
        del row["prob"]
        path = self.write_scores(tmp_path, [self.base_row(), row])
        with pytest.raises(TableParseError) as err:
            import_scores(path, self.plan())
        assert err.value.row == 2

    def test_invalid_prob_rejected(self, tmp_path):
        path = self.write_scores(tmp_path, [self.base_row(prob=2.0)])
        with pytest.raises(ProtocolError):
            import_scores(path, self.plan())

    def test_no_plan_skips_leakage_guard(self, tmp_path):
        path = self.write_scores(tmp_path, [self.base_row(trained_on_folds=[0, 1])])
        assert len(import_scores(path)) == 1
