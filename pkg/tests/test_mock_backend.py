"""Mock backend behavior, verified directly against the committed rule tables."""

import json
from importlib import resources

import pytest

from factscribe import MockModel, builtin_template
from factscribe.backends.base import ContractViolation
from factscribe.backends.mock import (
    CRITERION_ATOMIC,
    CRITERION_GROUNDED,
    CRITERION_NOT_DUPLICATE,
    CRITERION_WELL_FORMED,
)
from factscribe.facts import Fact, FactSet, FactStatus

from helpers import buffer_from_lines


@pytest.fixture
def mock():
    return MockModel()


@pytest.fixture
def rules_table():
    text = resources.files("factscribe.backends").joinpath("mock_rules.json").read_text()
    return json.loads(text)


def window_of(*lines):
    buf = buffer_from_lines(*lines)
    return buf.slice(1, buf.n)


def verdict_map(verdicts):
    return {v.criterion: v.passed for v in verdicts}


class TestDraft:
    def test_one_fact_per_marker_line(self, mock):
        win = window_of("PATIENT:\tSYMPTOM: headache", "DOCTOR:\tI see")
        facts = mock.draft_facts(win, FactSet())
        assert [f.text for f in facts] == ["headache"]
        assert facts[0].id == ""  # engine assigns ids

    def test_no_matches_is_empty(self, mock):
        win = window_of("DOCTOR:\tHow are you", "PATIENT:\tFine thanks")
        assert mock.draft_facts(win, FactSet()) == []

    def test_repeated_trigger_reuses_existing_id(self, mock):
        existing = FactSet().merge(
            [Fact(id="f0001", text="headache", info_units=("headache",),
                  status=FactStatus.ACCEPTED)]
        )
        win = window_of("PATIENT:\tSYMPTOM: headache")
        facts = mock.draft_facts(win, existing)
        assert [f.id for f in facts] == ["f0001"]

    def test_negated_restatement_revises_same_id(self, mock):
        existing = FactSet().merge(
            [Fact(id="f0001", text="fever", info_units=("fever",),
                  status=FactStatus.ACCEPTED)]
        )
        win = window_of("PATIENT:\tSYMPTOM: no fever")
        facts = mock.draft_facts(win, existing)
        assert [(f.id, f.text) for f in facts] == [("f0001", "no fever")]

    def test_units_split_on_separator(self, mock, rules_table):
        sep = rules_table["draft"]["unit_separator"]
        win = window_of(f"PATIENT:\tSYMPTOM: headache{sep} mild{sep} since morning")
        (fact,) = mock.draft_facts(win, FactSet())
        assert fact.info_units == ("headache", "mild", "since morning")

    def test_abstraction_rewrite_from_table(self, mock, rules_table):
        source, rewritten = next(iter(rules_table["draft"]["abstractions"].items()))
        win = window_of(f"PATIENT:\tSYMPTOM: {source}")
        (fact,) = mock.draft_facts(win, FactSet())
        assert fact.info_units == (rewritten,)

    def test_same_capture_twice_drafts_once(self, mock):
        win = window_of("PATIENT:\tSYMPTOM: cough", "PATIENT:\tSYMPTOM: cough")
        assert len(mock.draft_facts(win, FactSet())) == 1

    def test_extended_capture_revises_truncated_fact(self, mock):
        # a window boundary cut the capture short earlier; the full capture
        # revises the same fact rather than spawning a sibling
        existing = FactSet().merge(
            [Fact(id="f0001", text="cough", info_units=("cough",),
                  status=FactStatus.ACCEPTED)]
        )
        win = window_of("PATIENT:\tSYMPTOM: cough, dry")
        assert [(f.id, f.text) for f in mock.draft_facts(win, existing)] == [
            ("f0001", "cough, dry")
        ]

    def test_truncated_recapture_keeps_longer_text(self, mock):
        existing = FactSet().merge(
            [Fact(id="f0001", text="cough, dry", info_units=("cough", "dry"),
                  status=FactStatus.ACCEPTED)]
        )
        win = window_of("PATIENT:\tSYMPTOM: cough")
        assert [(f.id, f.text) for f in mock.draft_facts(win, existing)] == [
            ("f0001", "cough, dry")
        ]

    def test_purity(self, mock):
        win = window_of("PATIENT:\tSYMPTOM: headache, mild")
        first = mock.draft_facts(win, FactSet())
        second = mock.draft_facts(win, FactSet())
        assert first == second


class TestEvaluate:
    def test_grounded_fact_passes_all(self, mock):
        win = window_of("PATIENT:\tSYMPTOM: headache, mild")
        fact = Fact(id="f1", text="headache, mild", info_units=("headache", "mild"))
        assert all(v.passed for v in mock.evaluate_fact(fact, win))

    def test_five_units_fail_atomicity(self, mock):
        win = window_of("PATIENT:\tSYMPTOM: a, b, c, d, e")
        fact = Fact(id="f1", text="a, b, c, d, e", info_units=tuple("abcde"))
        verdicts = verdict_map(mock.evaluate_fact(fact, win))
        assert verdicts[CRITERION_ATOMIC] is False
        assert verdicts[CRITERION_GROUNDED] is True

    def test_empty_text_fails_well_formedness(self, mock):
        win = window_of("PATIENT:\tSYMPTOM: headache")
        fact = Fact(id="f1", text="", info_units=("headache",))
        assert verdict_map(mock.evaluate_fact(fact, win))[CRITERION_WELL_FORMED] is False

    def test_unsupported_unit_fails_groundedness(self, mock):
        win = window_of("PATIENT:\tSYMPTOM: headache")
        fact = Fact(id="f1", text="headache, tinnitus", info_units=("headache", "tinnitus"))
        verdicts = mock.evaluate_fact(fact, win)
        failed = [v for v in verdicts if v.criterion == CRITERION_GROUNDED][0]
        assert failed.passed is False
        assert "tinnitus" in failed.note

    def test_duplicate_against_other_fact_fails(self, mock):
        existing = FactSet().merge(
            [Fact(id="f0001", text="headache", info_units=("headache",),
                  status=FactStatus.ACCEPTED)]
        )
        win = window_of("PATIENT:\tSYMPTOM: headache")
        dupe = Fact(id="f0002", text="Headache", info_units=("headache",))
        assert verdict_map(mock.evaluate_fact(dupe, win, existing))[CRITERION_NOT_DUPLICATE] is False
        same = Fact(id="f0001", text="headache", info_units=("headache",))
        assert verdict_map(mock.evaluate_fact(same, win, existing))[CRITERION_NOT_DUPLICATE] is True

    def test_whole_word_grounding(self, mock):
        # "ache" is a substring of "headache" but not a whole-word match
        win = window_of("PATIENT:\tSYMPTOM: headache")
        fact = Fact(id="f1", text="ache", info_units=("ache",))
        assert verdict_map(mock.evaluate_fact(fact, win))[CRITERION_GROUNDED] is False


class TestRefine:
    def test_truncates_to_unit_cap(self, mock):
        win = window_of("PATIENT:\tSYMPTOM: a, b, c, d, e")
        fact = Fact(id="f1", text="a, b, c, d, e", info_units=tuple("abcde"))
        verdicts = mock.evaluate_fact(fact, win)
        refined = mock.refine_fact(fact, verdicts, win)
        assert refined.info_units == ("a", "b", "c", "d")
        assert refined.refinement_count == 1
        assert verdict_map(mock.evaluate_fact(refined, win))[CRITERION_ATOMIC] is True

    def test_drops_unsupported_unit(self, mock):
        win = window_of("PATIENT:\tSYMPTOM: headache")
        fact = Fact(id="f1", text="headache, tinnitus", info_units=("headache", "tinnitus"))
        refined = mock.refine_fact(fact, mock.evaluate_fact(fact, win), win)
        assert refined.info_units == ("headache",)
        assert "tinnitus" not in refined.text

    def test_all_pass_is_a_contract_violation(self, mock):
        win = window_of("PATIENT:\tSYMPTOM: headache")
        fact = Fact(id="f1", text="headache", info_units=("headache",))
        with pytest.raises(ContractViolation):
            mock.refine_fact(fact, mock.evaluate_fact(fact, win), win)

    def test_keeps_id(self, mock):
        win = window_of("PATIENT:\tSYMPTOM: a")
        fact = Fact(id="f9", text="a, b, c, d, e", info_units=tuple("abcde"))
        assert mock.refine_fact(fact, mock.evaluate_fact(fact, win), win).id == "f9"


class TestGenerateNote:
    def test_fact_bullets_under_keyword_sections(self, mock):
        soap = builtin_template("soap")
        facts = FactSet().merge(
            [Fact(id="f1", text="headache", info_units=("headache",),
                  status=FactStatus.ACCEPTED)]
        )
        assert mock.generate_note(facts, soap) == "S:\n- headache\nO:\nA:\nP:"

    def test_empty_fact_set_gives_empty_sections(self, mock):
        assert mock.generate_note(FactSet(), builtin_template("soap")) == "S:\nO:\nA:\nP:"

    def test_baseline_path_bullets_marker_lines(self, mock):
        buf = buffer_from_lines(
            "PATIENT:\tSYMPTOM: headache",
            "DOCTOR:\tany fever",
            "PATIENT:\tSYMPTOM: fever",
        )
        out = mock.generate_note(buf, builtin_template("soap"))
        assert out == "S:\n- headache\n- fever\nO:\nA:\nP:"

    def test_unknown_content_falls_into_first_section(self, mock):
        facts = FactSet().merge(
            [Fact(id="f1", text="zzz unknown zzz", info_units=("zzz unknown zzz",),
                  status=FactStatus.ACCEPTED)]
        )
        out = mock.generate_note(facts, builtin_template("soap"))
        assert "- zzz unknown zzz" in out.split("O:")[0]


class TestAlign:
    def test_paraphrase_via_synonym_table(self, mock):
        assert mock.align("low blood sugar", ["hypoglycemia present"]) == [True]

    def test_semantic_reversal_not_aligned(self, mock):
        query = "blood sugar is low, which helps prevent dizziness"
        assert mock.align(query, ["low blood sugar can cause dizziness"]) == [False]

    def test_reflexivity(self, mock):
        for text in ["headache", "no fever", "blood sugar is low, which helps prevent dizziness"]:
            assert mock.align(text, [text]) == [True]

    def test_negation_on_both_sides_compares_content(self, mock):
        assert mock.align("no headache", ["denies headache"]) == [True]

    def test_partial_alignment_accepted(self, mock):
        # most of the query's content present in a longer candidate
        assert mock.align("fever, since yesterday", ["patient reports fever since yesterday evening"]) == [True]

    def test_disjoint_content_not_aligned(self, mock):
        assert mock.align("headache", ["parking trouble"]) == [False]
