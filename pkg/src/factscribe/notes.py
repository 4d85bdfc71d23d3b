"""Note templates, structured clinical notes, and note parsing.

A template declares the ordered sections a note must contain; the same
template object is handed byte-for-byte to both the fact-based and the
transcript-baseline generation paths. Generated text must emit each section
header verbatim so parsing back into sections is deterministic.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING

from .facts import FactSet

if TYPE_CHECKING:  # pragma: no cover
    from .windowing import TranscriptBuffer


class NoteKind(str, Enum):
    BASELINE = "baseline"        # generated straight from the transcript
    FROM_FACTS = "from_facts"    # generated from the extracted fact set
    FILTERED = "filtered"        # facts after simulated clinician filtering
    AUGMENTED = "augmented"      # filtered facts plus simulated additions
    GOLD = "gold"                # physician-written reference note


class TemplateError(Exception):
    """Template file is malformed (duplicate keys, no sections)."""


class NoteParseError(Exception):
    """Raw note text does not fit the template's section structure."""

    def __init__(self, message: str, line: str = ""):
        super().__init__(message)
        self.line = line


class NoteFormatError(Exception):
    """A backend produced note text that cannot be parsed; carries the raw text."""

    def __init__(self, message: str, raw_text: str):
        super().__init__(message)
        self.raw_text = raw_text


@dataclass(frozen=True)
class TemplateSection:
    key: str
    title: str
    guidance: str = ""


@dataclass(frozen=True)
class NoteTemplate:
    name: str
    sections: tuple[TemplateSection, ...]
    preamble: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "sections", tuple(self.sections))
        if not self.sections:
            raise TemplateError(f"template {self.name!r} declares no sections")
        keys = [s.key for s in self.sections]
        if len(keys) != len({k.casefold() for k in keys}):
            raise TemplateError(f"template {self.name!r} has duplicate section keys")

    @property
    def keys(self) -> tuple[str, ...]:
        return tuple(s.key for s in self.sections)

    def section_for(self, key: str) -> TemplateSection | None:
        folded = key.casefold()
        for s in self.sections:
            if s.key.casefold() == folded:
                return s
        return None

    def prompt_text(self) -> str:
        """Canonical instruction text handed to generation backends.

        Both the fact path and the transcript path receive this exact byte
        sequence, so the two variants differ only in their source material.
        """
        lines = []
        if self.preamble:
            lines.append(self.preamble)
        for s in self.sections:
            lines.append(f"{s.key} ({s.title}): {s.guidance}".rstrip().rstrip(":"))
        return "\n".join(lines)


_SECTION_MARKER = re.compile(r"^#\s*SECTION\s+(?P<key>[^:]+):\s*(?P<title>.*)$")
_NAME_MARKER = re.compile(r"^#\s*TEMPLATE\s+(?P<name>\S.*)$")


def parse_template(text: str, name: str = "template") -> NoteTemplate:
    """Parse the plain-text template format.

    ``# TEMPLATE <name>`` optionally names the template; plain lines before
    the first ``# SECTION <key>: <title>`` marker form the preamble; lines
    after a marker are that section's guidance.
    """
    preamble_lines: list[str] = []
    sections: list[tuple[str, str, list[str]]] = []
    for raw_line in text.splitlines():
        line = raw_line.rstrip()
        name_m = _NAME_MARKER.match(line)
        if name_m and not sections:
            name = name_m.group("name").strip()
            continue
        sect_m = _SECTION_MARKER.match(line)
        if sect_m:
            sections.append((sect_m.group("key").strip(), sect_m.group("title").strip(), []))
            continue
        if sections:
            sections[-1][2].append(line)
        elif line:
            preamble_lines.append(line)
    return NoteTemplate(
        name=name,
        sections=tuple(
            TemplateSection(key, title, "\n".join(body).strip())
            for key, title, body in sections
        ),
        preamble="\n".join(preamble_lines).strip(),
    )


def load_template(path: str | Path) -> NoteTemplate:
    path = Path(path)
    return parse_template(path.read_text(encoding="utf-8"), name=path.stem)


def builtin_template(name: str = "general") -> NoteTemplate:
    """A template shipped with the package: ``general`` (default) or ``soap``."""
    text = resources.files("factscribe.templates").joinpath(f"{name}.txt").read_text(
        encoding="utf-8"
    )
    return parse_template(text, name=name)


def resolve_template(ref: str) -> NoteTemplate:
    """A builtin template name, or a path to a template file."""
    path = Path(ref)
    if path.exists() and path.is_file():
        return load_template(path)
    try:
        return builtin_template(ref)
    except FileNotFoundError:
        raise TemplateError(f"no template named {ref!r} and no such file") from None


@dataclass(frozen=True)
class ClinicalNote:
    """A section-structured note; every statement belongs to exactly one section."""

    kind: NoteKind
    sections: tuple[tuple[str, tuple[str, ...]], ...]  # (key, statements) in order
    raw_text: str = ""

    def statements(self, key: str | None = None) -> tuple[str, ...]:
        if key is None:
            return tuple(s for _, stmts in self.sections for s in stmts)
        for k, stmts in self.sections:
            if k == key:
                return stmts
        raise KeyError(key)

    @property
    def section_keys(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.sections)

    def is_empty(self) -> bool:
        return not any(stmts for _, stmts in self.sections)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "sections": {k: list(stmts) for k, stmts in self.sections},
            "section_order": list(self.section_keys),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    def to_text(self) -> str:
        lines = []
        for key, stmts in self.sections:
            lines.append(f"{key}:")
            lines.extend(f"- {s}" for s in stmts)
        return "\n".join(lines)

    @classmethod
    def from_plain_text(cls, text: str, kind: NoteKind = NoteKind.GOLD,
                        section_key: str = "note") -> "ClinicalNote":
        """Wrap free-form note text as a single-section note.

        Used for reference notes whose sections we deliberately concatenate;
        statements are the non-empty lines with list markers stripped.
        """
        stmts = []
        for line in text.splitlines():
            cleaned = _strip_list_marker(line.strip())
            if cleaned:
                stmts.append(cleaned)
        return cls(kind=kind, sections=((section_key, tuple(stmts)),), raw_text=text)

    @classmethod
    def from_dict(cls, data: dict) -> "ClinicalNote":
        order = data.get("section_order") or list(data.get("sections", {}))
        return cls(
            kind=NoteKind(data["kind"]),
            sections=tuple(
                (k, tuple(data["sections"].get(k, ()))) for k in order
            ),
        )


_BULLET_RE = re.compile(r"^(?:[-*•·]|\d+[.)])\s+")
_BARE_HEADER_RE = re.compile(r"^(?P<key>\S[^:]*):\s*$")
_INLINE_HEADER_RE = re.compile(r"^(?P<key>[^:\t]+):\s*(?P<rest>.*)$")


def _strip_list_marker(line: str) -> str:
    return _BULLET_RE.sub("", line).strip()


def parse_note(raw_text: str, template: NoteTemplate,
               kind: NoteKind = NoteKind.FROM_FACTS) -> ClinicalNote:
    """Parse generated note text into template sections.

    A line whose leading ``key:`` matches a declared section opens that
    section (any inline remainder becomes its first statement). A bare
    ``word:`` line with an unknown key is an error; lines with inline
    content and an unknown key are ordinary statements, so things like
    ``BP: 120/80`` survive inside a section. Statements keep their text with
    list markers stripped.
    """
    declared = {s.key.casefold(): s.key for s in template.sections}
    collected: dict[str, list[str]] = {s.key: [] for s in template.sections}
    seen: list[str] = []
    current: str | None = None

    for raw_line in raw_text.splitlines():
        line = raw_line.strip()
        if not line:
            continue
        inline = _INLINE_HEADER_RE.match(line)
        header_key = None
        if inline and inline.group("key").strip().casefold() in declared:
            header_key = declared[inline.group("key").strip().casefold()]
            rest = inline.group("rest").strip()
        elif _BARE_HEADER_RE.match(line):
            bare = _BARE_HEADER_RE.match(line).group("key").strip()
            raise NoteParseError(f"unknown section header {bare!r}", line=raw_line)
        if header_key is not None:
            if header_key in seen:
                raise NoteParseError(
                    f"section {header_key!r} appears more than once", line=raw_line
                )
            seen.append(header_key)
            current = header_key
            if rest:
                cleaned = _strip_list_marker(rest)
                if cleaned:
                    collected[current].append(cleaned)
            continue
        if current is None:
            raise NoteParseError("statement before any section header", line=raw_line)
        cleaned = _strip_list_marker(line)
        if cleaned:
            collected[current].append(cleaned)

    missing = [k for k in template.keys if k not in seen]
    if missing:
        raise NoteParseError(f"missing sections: {missing}")
    return ClinicalNote(
        kind=kind,
        sections=tuple((k, tuple(collected[k])) for k in template.keys),
        raw_text=raw_text,
    )


def render_from_facts(facts: FactSet, template: NoteTemplate, backend,
                      kind: NoteKind = NoteKind.FROM_FACTS) -> ClinicalNote:
    """Generate a note from the fact set (rejected facts are filtered here)."""
    source = facts.without_rejected()
    raw = backend.generate_note(source, template)
    return _parse_generated(raw, template, kind)


def render_from_transcript(buffer: "TranscriptBuffer", template: NoteTemplate, backend,
                           kind: NoteKind = NoteKind.BASELINE) -> ClinicalNote:
    """Generate the baseline note straight from the raw transcript."""
    raw = backend.generate_note(buffer, template)
    return _parse_generated(raw, template, kind)


def _parse_generated(raw: str, template: NoteTemplate, kind: NoteKind) -> ClinicalNote:
    try:
        return parse_note(raw, template, kind=kind)
    except NoteParseError as exc:
        raise NoteFormatError(f"backend produced unparseable note: {exc}", raw_text=raw) from exc
