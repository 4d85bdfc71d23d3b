"""Templates, note parsing, and the two rendering paths."""

import pytest

from factscribe import (
    ClinicalNote,
    FactSet,
    MockModel,
    NoteKind,
    builtin_template,
    parse_note,
    render_from_facts,
    render_from_transcript,
)
from factscribe.facts import Fact, FactStatus, tombstone
from factscribe.notes import (
    NoteFormatError,
    NoteParseError,
    NoteTemplate,
    TemplateError,
    TemplateSection,
    load_template,
    parse_template,
)

from helpers import buffer_from_lines


def accepted(fact_id, text):
    return Fact(id=fact_id, text=text, info_units=(text,), status=FactStatus.ACCEPTED)


class TestTemplates:
    def test_builtin_soap_has_four_sections(self):
        soap = builtin_template("soap")
        assert soap.keys == ("S", "O", "A", "P")
        assert all(s.title for s in soap.sections)
        assert soap.preamble

    def test_builtin_general_is_multi_section(self):
        general = builtin_template("general")
        assert len(general.sections) >= 4
        assert len(set(general.keys)) == len(general.keys)

    def test_parse_template_format(self):
        tpl = parse_template(
            "# TEMPLATE mini\nIntro line.\n# SECTION A: Alpha\nguidance a\n"
            "# SECTION B: Beta\n"
        )
        assert tpl.name == "mini"
        assert tpl.preamble == "Intro line."
        assert tpl.sections == (
            TemplateSection("A", "Alpha", "guidance a"),
            TemplateSection("B", "Beta", ""),
        )

    def test_template_requires_sections(self):
        with pytest.raises(TemplateError):
            parse_template("just a preamble\n")

    def test_duplicate_keys_rejected(self):
        with pytest.raises(TemplateError):
            NoteTemplate("t", (TemplateSection("A", "x"), TemplateSection("a", "y")))

    def test_load_template_from_file(self, tmp_path):
        path = tmp_path / "custom.txt"
        path.write_text("# SECTION X: Only\nstuff\n")
        tpl = load_template(path)
        assert tpl.name == "custom"
        assert tpl.keys == ("X",)


class TestParseNote:
    def test_basic_sections(self):
        soap = builtin_template("soap")
        note = parse_note("S:\n- a\nO:\nA:\nP:", soap)
        assert note.statements("S") == ("a",)
        assert note.statements("O") == ()
        assert note.section_keys == ("S", "O", "A", "P")

    def test_stray_header_is_an_error_naming_it(self):
        soap = builtin_template("soap")
        with pytest.raises(NoteParseError, match="'X'"):
            parse_note("S:\nX:\nO:\nA:\nP:", soap)

    def test_inline_statement_with_colon_is_not_a_header(self):
        soap = builtin_template("soap")
        note = parse_note("S:\nO:\nBP: 120/80\nA:\nP:", soap)
        assert note.statements("O") == ("BP: 120/80",)

    def test_missing_section_is_an_error(self):
        soap = builtin_template("soap")
        with pytest.raises(NoteParseError, match="missing"):
            parse_note("S:\nO:\nA:", soap)

    def test_statement_before_any_section(self):
        soap = builtin_template("soap")
        with pytest.raises(NoteParseError, match="before any section"):
            parse_note("floating\nS:\nO:\nA:\nP:", soap)

    def test_repeated_section_is_an_error(self):
        soap = builtin_template("soap")
        with pytest.raises(NoteParseError, match="more than once"):
            parse_note("S:\nS:\nO:\nA:\nP:", soap)

    def test_roundtrip_preserves_section_membership(self):
        soap = builtin_template("soap")
        facts = FactSet().merge([accepted("f1", "headache"), accepted("f2", "fever")])
        rendered = render_from_facts(facts, soap, MockModel())
        reparsed = parse_note(rendered.raw_text, soap, kind=rendered.kind)
        assert reparsed.sections == rendered.sections

    def test_inline_header_content_kept(self):
        tpl = parse_template("# SECTION Plan: Plan\n")
        note = parse_note("Plan: rest and fluids", tpl)
        assert note.statements("Plan") == ("rest and fluids",)


class TestRendering:
    def test_empty_fact_set_renders_empty_sections(self):
        note = render_from_facts(FactSet(), builtin_template("soap"), MockModel())
        assert note.is_empty()
        assert note.section_keys == ("S", "O", "A", "P")

    def test_single_fact_lands_in_subjective(self):
        facts = FactSet().merge([accepted("f1", "headache")])
        note = render_from_facts(facts, builtin_template("soap"), MockModel())
        assert note.statements("S") == ("headache",)
        assert note.statements("O") == ()

    def test_rejected_facts_excluded(self):
        facts = FactSet().merge([accepted("f1", "headache"), accepted("f2", "fever")])
        facts = facts.merge([tombstone(facts.get("f2"))])
        note = render_from_facts(facts, builtin_template("soap"), MockModel())
        assert "headache" in note.statements()
        assert all("fever" not in s for s in note.statements())

    def test_transcript_baseline_and_fact_paths_share_template(self):
        soap = builtin_template("soap")
        buf = buffer_from_lines("PATIENT:\tSYMPTOM: headache")
        facts = FactSet().merge([accepted("f1", "headache")])

        class RecordingMock(MockModel):
            def __init__(self):
                super().__init__()
                self.prompts = []

            def generate_note(self, source, template):
                self.prompts.append(template.prompt_text())
                return super().generate_note(source, template)

        recorder = RecordingMock()
        baseline = render_from_transcript(buf, soap, recorder)
        from_facts = render_from_facts(facts, soap, recorder)
        assert recorder.prompts[0] == recorder.prompts[1]  # byte-identical template
        assert baseline.kind is NoteKind.BASELINE
        assert from_facts.kind is NoteKind.FROM_FACTS
        assert baseline.sections == from_facts.sections

    def test_empty_transcript_baseline(self):
        from factscribe import TranscriptBuffer
        note = render_from_transcript(TranscriptBuffer(), builtin_template("soap"),
                                      MockModel())
        assert note.is_empty()

    def test_malformed_backend_output_carries_raw_text(self):
        class Truncating(MockModel):
            def generate_note(self, source, template):
                return "S:\n- something"  # missing O/A/P

        with pytest.raises(NoteFormatError) as err:
            render_from_facts(FactSet(), builtin_template("soap"), Truncating())
        assert err.value.raw_text == "S:\n- something"


class TestPlainTextNotes:
    def test_from_plain_text_single_section(self):
        note = ClinicalNote.from_plain_text("- headache\n\nfever present.\n")
        assert note.kind is NoteKind.GOLD
        assert note.statements() == ("headache", "fever present.")

    def test_note_json_roundtrip(self):
        note = ClinicalNote.from_plain_text("a\nb\n")
        again = ClinicalNote.from_dict(note.to_dict())
        assert again.sections == note.sections
