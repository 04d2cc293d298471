from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from factloop import prompts
from factloop.exceptions import ConfigurationError, ContractViolation

GOLDEN_DIR = Path(__file__).parent / "goldens"

X = "age: 65th percentile; savings_rate: 25th percentile"
POINT = "The savings rate is high."
Y_RAW = "good credit\nThe savings rate is high. The age is typical."

# benign text that cannot collide with template placeholder markers
sane_text = st.text(
    st.characters(whitelist_categories=("Ll", "Lu", "Nd"), whitelist_characters=" .,;?"),
    min_size=1,
    max_size=80,
).filter(lambda s: s.strip())


class TestGoldenFiles:
    def test_generation_matches_golden_bytes(self):
        rendered = prompts.render_generation(X)
        assert rendered.encode("utf-8") == (GOLDEN_DIR / "p_gen.txt").read_bytes()

    def test_feedback_probe_matches_golden_bytes(self):
        rendered = prompts.render_feedback_probe(X, POINT)
        assert rendered.encode("utf-8") == (GOLDEN_DIR / "p_fed.txt").read_bytes()

    def test_refinement_matches_golden_bytes(self):
        rendered = prompts.render_refinement(X, Y_RAW, [POINT])
        assert rendered.encode("utf-8") == (GOLDEN_DIR / "p_ref.txt").read_bytes()

    def test_refinement_keeps_original_grammar(self):
        rendered = prompts.render_refinement(X, Y_RAW, [POINT])
        assert "These errors does not match the given attributes." in rendered


class TestGeneration:
    def test_contains_substituted_attributes(self):
        rendered = prompts.render_generation("age: 65th percentile")
        assert "And the attributes are as follows: age: 65th percentile. Response: " in rendered

    def test_distinct_inputs_differ_only_in_x_span(self):
        a = prompts.render_generation("alpha")
        b = prompts.render_generation("beta")
        prefix = "And the attributes are as follows: "
        assert a.split(prefix)[0] == b.split(prefix)[0]
        assert a.split(prefix)[1] == "alpha. Response: "
        assert b.split(prefix)[1] == "beta. Response: "

    def test_decision_literals_exactly_once(self):
        rendered = prompts.render_generation(X)
        assert rendered.count("good credit") == 1
        assert rendered.count("bad credit") == 1

    def test_ends_with_response_cue(self):
        assert prompts.render_generation(X).endswith("Response: ")

    def test_empty_x_rejected(self):
        with pytest.raises(ContractViolation):
            prompts.render_generation("")


class TestFeedbackProbe:
    def test_template_shape(self):
        rendered = prompts.render_feedback_probe("ctx", "income is high")
        assert rendered == "ctx. Question: does this imply income is high? Yes or No? Response: "

    def test_deterministic(self):
        assert prompts.render_feedback_probe(X, POINT) == prompts.render_feedback_probe(X, POINT)

    def test_question_mark_in_point_preserved(self):
        rendered = prompts.render_feedback_probe("ctx", "is this high?")
        assert "does this imply is this high?? Yes or No?" in rendered


class TestRefinement:
    def test_single_flag_appears_once(self):
        rendered = prompts.render_refinement(X, Y_RAW, ["claim one."])
        assert rendered.count("claim one.") == 1
        assert "factual errors: - claim one." in rendered

    def test_three_flags_keep_order(self):
        rendered = prompts.render_refinement(X, Y_RAW, ["first", "second", "third"])
        block = rendered.split("factual errors: ")[1].split(". These errors")[0]
        assert block == "- first\n- second\n- third"

    def test_empty_flags_rejected(self):
        with pytest.raises(ContractViolation):
            prompts.render_refinement(X, Y_RAW, [])

    def test_entire_content_granularity_skips_bullets(self):
        rendered = prompts.render_refinement(
            X, Y_RAW, ["full reasoning text here"], granularity=prompts.ENTIRE_CONTENT
        )
        assert "factual errors: full reasoning text here." in rendered
        assert "- full reasoning" not in rendered

    def test_contains_round_context(self):
        rendered = prompts.render_refinement(X, Y_RAW, ["flag"])
        assert prompts.build_round_context(X, Y_RAW) in rendered


class TestRoundContext:
    def test_contains_exactly_x_and_latest(self):
        ctx = prompts.build_round_context("ATTRS", "LATEST-RESPONSE")
        assert "ATTRS" in ctx and "LATEST-RESPONSE" in ctx

    def test_round2_equals_single_refinement_context(self):
        # base case: the context for round 2 is the same rendering used by a
        # one-shot refinement
        ctx = prompts.build_round_context(X, Y_RAW)
        assert prompts.render_refinement(X, Y_RAW, ["f"]).startswith(ctx)

    def test_context_length_independent_of_round_count(self):
        # simulate 5 rounds with fixed-length responses: context stays flat
        response = "bad credit\n" + "x" * 40
        lengths = []
        for _ in range(5):
            ctx = prompts.build_round_context(X, response)
            lengths.append(len(ctx))
        assert len(set(lengths)) == 1


class TestPlaceholderCompleteness:
    @given(x=sane_text, point=sane_text, y=sane_text)
    def test_no_placeholder_survives(self, x, point, y):
        for rendered in (
            prompts.render_generation(x),
            prompts.render_feedback_probe(x, point),
            prompts.render_refinement(x, y, [point]),
            prompts.build_round_context(x, y),
        ):
            assert "{X}" not in rendered
            assert "{Y" not in rendered
            assert "{F" not in rendered


class TestTemplateFiles:
    def test_templates_swappable_without_rebuild(self, tmp_path, monkeypatch):
        alt = tmp_path / "templates"
        alt.mkdir()
        (alt / "generation.txt").write_text("Custom prompt {X}. Response: ", encoding="utf-8")
        for name in ("feedback_probe", "refinement", "round_context"):
            source = prompts._DEFAULT_DIR / f"{name}.txt"
            (alt / f"{name}.txt").write_text(source.read_text(encoding="utf-8"), encoding="utf-8")
        monkeypatch.setenv("FACTLOOP_TEMPLATE_DIR", str(alt))
        assert prompts.render_generation("A") == "Custom prompt A. Response: "

    def test_trailing_newline_trimmed(self, tmp_path, monkeypatch):
        alt = tmp_path / "templates"
        alt.mkdir()
        (alt / "generation.txt").write_text("G {X}. Response: \n", encoding="utf-8")
        monkeypatch.setenv("FACTLOOP_TEMPLATE_DIR", str(alt))
        assert prompts.render_generation("A") == "G A. Response: "

    def test_template_missing_placeholder_rejected(self, tmp_path, monkeypatch):
        alt = tmp_path / "templates"
        alt.mkdir()
        (alt / "generation.txt").write_text("no placeholder here", encoding="utf-8")
        monkeypatch.setenv("FACTLOOP_TEMPLATE_DIR", str(alt))
        with pytest.raises(ConfigurationError):
            prompts.render_generation("A")
