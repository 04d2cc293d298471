import pytest

from factloop import feedback as fb
from factloop.dataset import CaseRecord
from factloop.exceptions import ContractViolation, IncompleteAnnotationError
from factloop.lm_client import MockBackend, register_mock
from factloop.parser import Generation, ReasoningPoint, parse_generation
from factloop.prompts import ENTIRE_CONTENT, SINGLE_POINT
from factloop.verifier_gateway import VerifierScore

CASE = CaseRecord(id="c1", attributes=(("age", "65th percentile"),), label=1)


def make_generation(texts, case_id="c1", round=0, decision=1):
    points = [ReasoningPoint(index=i + 1, text=t) for i, t in enumerate(texts)]
    raw = ("good credit" if decision == 1 else "bad credit") + "\n" + " ".join(texts)
    return Generation(case_id=case_id, round=round, decision=decision, points=points, raw=raw)


def annotation(index, hallucinated, case_id="c1", round=0, annotator="ann1"):
    return fb.AnnotationRecord(
        case_id=case_id, round=round, point_index=index,
        hallucinated=hallucinated, annotator=annotator,
    )


def score(index, prob, case_id="c1", round=0):
    return VerifierScore(
        case_id=case_id, round=round, point_index=index, prob=prob,
        scorer_id="enc", trained_on_folds=frozenset({1, 2}),
    )


class TestOracleFlags:
    def test_flags_follow_annotations(self):
        generation = make_generation(["a.", "b.", "c."])
        bundle = fb.oracle_flags(generation, [annotation(1, 1), annotation(2, 0), annotation(3, 0)])
        assert bundle.flagged_points == ((1, "a."),)
        assert bundle.source == "oracle"

    def test_all_zero_empty_bundle(self):
        generation = make_generation(["a.", "b."])
        bundle = fb.oracle_flags(generation, [annotation(1, 0), annotation(2, 0)])
        assert bundle.empty

    def test_missing_annotation_names_index(self):
        generation = make_generation(["a.", "b.", "c."])
        with pytest.raises(IncompleteAnnotationError) as err:
            fb.oracle_flags(generation, [annotation(1, 0), annotation(3, 0)])
        assert err.value.missing == [2]

    def test_majority_vote_and_tie_flags(self):
        generation = make_generation(["a."])
        records = [
            annotation(1, 1, annotator="x"),
            annotation(1, 0, annotator="y"),
        ]
        assert not fb.oracle_flags(generation, records).empty  # tie -> flagged
        records.append(annotation(1, 0, annotator="z"))
        assert fb.oracle_flags(generation, records).empty  # majority clean

    def test_other_cases_annotations_ignored(self):
        generation = make_generation(["a."])
        records = [annotation(1, 0), annotation(1, 1, case_id="other")]
        assert fb.oracle_flags(generation, records).empty


class TestVerifierFlags:
    def test_threshold_rule(self):
        generation = make_generation(["a.", "b."])
        bundle = fb.verifier_flags(generation, [score(1, 0.9), score(2, 0.1)])
        assert bundle.flagged_points == ((1, "a."),)

    def test_boundary_both_flagged(self):
        generation = make_generation(["a.", "b."])
        bundle = fb.verifier_flags(generation, [score(1, 0.5), score(2, 0.5)])
        assert [i for i, _ in bundle.flagged_points] == [1, 2]

    def test_all_zero_probs_empty(self):
        generation = make_generation(["a.", "b."])
        assert fb.verifier_flags(generation, [score(1, 0.0), score(2, 0.0)]).empty

    def test_missing_score_errors_with_index(self):
        generation = make_generation(["a.", "b."])
        with pytest.raises(ContractViolation) as err:
            fb.verifier_flags(generation, [score(1, 0.4)])
        assert "[2]" in str(err.value)


def probe_script(answers):
    """Map probe prompts to canned yes/no answers keyed by point text."""
    entries = [(("contains", f"does this imply {text}"), answer) for text, answer in answers]
    return MockBackend(entries, name="probe-mock")


class TestProbeChannels:
    def test_no_flags_only_probed_point(self):
        generation = make_generation(["a.", "b.", "c."])
        backend = probe_script([("a.", "Yes."), ("b.", "No."), ("c.", "Yes.")])
        bundle = fb.self_reflection_flags(generation, CASE, backend)
        assert bundle.flagged_points == ((2, "b."),)
        assert bundle.source == "self_reflection"
        assert bundle.warnings == 0

    def test_all_yes_empty(self):
        generation = make_generation(["a."])
        bundle = fb.self_reflection_flags(generation, CASE, probe_script([("a.", "Yes.")]))
        assert bundle.empty

    def test_unparseable_counts_warning_no_flag(self):
        generation = make_generation(["a."])
        bundle = fb.self_reflection_flags(generation, CASE, probe_script([("a.", "Maybe.")]))
        assert bundle.empty
        assert bundle.warnings == 1

    def test_finetuned_same_path_different_backend(self, monkeypatch):
        calls = []
        original = fb.probe_flags

        def spy(generation, case, backend, source, tags=None):
            calls.append((source, backend.name))
            return original(generation, case, backend, source, tags=tags)

        monkeypatch.setattr(fb, "probe_flags", spy)
        generation = make_generation(["a."])
        reflect_backend = probe_script([("a.", "No.")])
        tuned_backend = MockBackend(
            [(("contains", "does this imply a."), "Yes.")], name="tuned"
        )
        self_bundle = fb.self_reflection_flags(generation, CASE, reflect_backend)
        tuned_bundle = fb.finetuned_slm_flags(generation, CASE, tuned_backend)
        assert calls == [("self_reflection", "probe-mock"), ("finetuned_slm", "tuned")]
        assert self_bundle.source == "self_reflection"
        assert tuned_bundle.source == "finetuned_slm"
        # same probe path, different verdicts only because backends differ
        assert not self_bundle.empty and tuned_bundle.empty

    def test_channel_isolation_oracle_verifier_never_call_backend(self):
        generation = make_generation(["a.", "b."])
        backend = probe_script([("a.", "Yes."), ("b.", "Yes.")])
        fb.oracle_flags(generation, [annotation(1, 0), annotation(2, 1)])
        fb.verifier_flags(generation, [score(1, 0.2), score(2, 0.8)])
        assert backend.exchanges == []


class TestEntireContent:
    def test_probe_no_flags_everything(self):
        generation = make_generation(["a.", "b."])
        backend = MockBackend([(("contains", "does this imply"), "No.")])
        bundle = fb.entire_content_flags(generation, CASE, backend=backend)
        assert [i for i, _ in bundle.flagged_points] == [1, 2]
        assert bundle.granularity == ENTIRE_CONTENT

    def test_probe_yes_empty(self):
        generation = make_generation(["a.", "b."])
        backend = MockBackend([(("contains", "does this imply"), "Yes.")])
        assert fb.entire_content_flags(generation, CASE, backend=backend).empty

    def test_probe_targets_concatenated_reasoning(self):
        generation = make_generation(["a.", "b."])
        backend = MockBackend([(("contains", "does this imply a. b.?"), "No.")])
        bundle = fb.entire_content_flags(generation, CASE, backend=backend)
        assert not bundle.empty

    def test_single_point_degenerate_equality(self):
        generation = make_generation(["only point."])
        backend = MockBackend([(("contains", "does this imply"), "No.")])
        entire = fb.entire_content_flags(generation, CASE, backend=backend)
        single = fb.self_reflection_flags(generation, CASE, backend)
        assert [i for i, _ in entire.flagged_points] == [i for i, _ in single.flagged_points]

    def test_oracle_source_aggregates(self):
        generation = make_generation(["a.", "b."])
        bundle = fb.entire_content_flags(
            generation, CASE, annotations=[annotation(1, 0), annotation(2, 1)], source="oracle"
        )
        assert [i for i, _ in bundle.flagged_points] == [1, 2]


def refinement_mock(reply="bad credit\nSavings are at the 5th percentile."):
    return MockBackend([(("contains", "factual errors"), reply)], name="refine-mock")


class TestRunRefinement:
    def test_empty_bundle_identity_with_note(self):
        generation = make_generation(["a."])
        bundle = fb.oracle_flags(generation, [annotation(1, 0)])
        backend = refinement_mock()
        refined = fb.run_refinement(CASE, generation, bundle, backend)
        assert refined.round == 1
        assert refined.decision == generation.decision
        assert [p.text for p in refined.points] == [p.text for p in generation.points]
        assert refined.note == fb.NO_FEEDBACK_SKIP
        assert backend.exchanges == []  # skip means no call at all

    def test_flagged_point_flips_decision(self):
        generation = make_generation(["a."], decision=1)
        bundle = fb.oracle_flags(generation, [annotation(1, 1)])
        refined = fb.run_refinement(CASE, generation, bundle, refinement_mock())
        assert refined.decision == 0
        assert refined.round == 1

    def test_bundle_case_mismatch(self):
        generation = make_generation(["a."])
        other = make_generation(["a."], case_id="other")
        bundle = fb.oracle_flags(other, [annotation(1, 1, case_id="other")])
        with pytest.raises(ContractViolation):
            fb.run_refinement(CASE, generation, bundle, refinement_mock())

    def test_bundle_round_mismatch(self):
        generation = make_generation(["a."])
        stale = make_generation(["a."], round=1)
        bundle = fb.oracle_flags(stale, [annotation(1, 1, round=1)])
        with pytest.raises(ContractViolation):
            fb.run_refinement(CASE, generation, bundle, refinement_mock())


def multi_round_mock(rounds=3):
    """Initial + oscillating refinements keyed on round-marker text."""
    entries = [(("contains", "does this imply"), "No.")]
    for r in range(rounds, 0, -1):
        decision = "good credit" if r % 2 == 0 else "bad credit"
        entries.append(
            (("regex", rf"factual errors.*R{r - 1}-MARK"), f"{decision}\nR{r}-MARK point.")
        )
    entries.append((("prefix", "Assess the creditworthiness"), "good credit\nR0-MARK point."))
    return MockBackend(entries, name="rounds-mock")


class TestRunMultiRound:
    def test_rounds_zero_initial_only(self):
        series = fb.run_multi_round(
            CASE, 0, SINGLE_POINT, "self_reflection", multi_round_mock()
        )
        assert len(series) == 1
        assert series[0].round == 0

    def test_rounds_one_equals_single_refinement(self):
        backend = multi_round_mock(rounds=1)
        series = fb.run_multi_round(CASE, 1, SINGLE_POINT, "self_reflection", backend)
        initial = fb.initial_generation(CASE, multi_round_mock(rounds=1))
        bundle = fb.self_reflection_flags(initial, CASE, multi_round_mock(rounds=1))
        refined = fb.run_refinement(CASE, initial, bundle, multi_round_mock(rounds=1))
        assert series[1].decision == refined.decision
        assert [p.text for p in series[1].points] == [p.text for p in refined.points]

    def test_oscillating_decisions(self):
        series = fb.run_multi_round(
            CASE, 3, ENTIRE_CONTENT, "self_reflection", multi_round_mock(rounds=3)
        )
        assert [g.decision for g in series] == [1, 0, 1, 0]
        assert [g.round for g in series] == [0, 1, 2, 3]

    def test_later_round_context_drops_early_rounds(self):
        backend = multi_round_mock(rounds=3)
        fb.run_multi_round(CASE, 3, ENTIRE_CONTENT, "self_reflection", backend)
        round3_prompts = [
            e.prompt for e in backend.exchanges
            if e.tags.get("kind") == "refinement" and e.tags.get("round") == 3
        ]
        assert len(round3_prompts) == 1
        prompt = round3_prompts[0]
        assert "R2-MARK" in prompt  # latest response retained
        assert "age: 65th percentile" in prompt  # original attributes retained
        assert "R0-MARK" not in prompt and "R1-MARK" not in prompt

    def test_negative_rounds_rejected(self):
        with pytest.raises(ContractViolation):
            fb.run_multi_round(CASE, -1, SINGLE_POINT, "self_reflection", multi_round_mock())
