"""Segmentation, bipartite alignment, and the note-quality metrics.

Notes are segmented into standalone sentences before alignment. For every
metric the denominator side's segments are used as queries against the
other document's segments as candidates; a segment counts as covered when
it belongs to at least one pair the alignment judge labeled 1. That
direction makes the self-alignment calibration identity exact: a note
aligned against itself must score 1.0 completeness and conciseness.

Metrics:
  completeness — fraction of gold segments whose meaning is present in the
                 generated note (recall-like).
  conciseness  — fraction of generated segments whose meaning is found in
                 the gold note (precision-like).
  groundedness — fraction of note segments supported by at least one
                 transcript utterance.
  adjusted completeness — completeness divided by the gold note's own
                 groundedness, capped at 1.0, compensating for gold content
                 that the transcript never mentions.

Empty denominators are errors, never silently 0 or 1, so corpus averages
cannot be corrupted by degenerate notes.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .backends.base import AlignmentModel
from .notes import ClinicalNote, NoteKind
from .windowing import TranscriptBuffer


class MetricUndefinedError(Exception):
    """The metric's denominator side has no segments."""


class SegmentSource(str, Enum):
    GOLD_NOTE = "gold_note"
    GENERATED_NOTE = "generated_note"
    TRANSCRIPT = "transcript"
    FACT_SET = "fact_set"


@dataclass(frozen=True)
class Segment:
    id: str
    text: str
    source: SegmentSource
    section: str | None = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("segment text must be non-empty")


# Dotted tokens that end in a period without ending a sentence.
_ABBREVIATIONS = frozenset({
    "dr.", "mr.", "mrs.", "ms.", "prof.", "st.", "vs.", "etc.", "e.g.",
    "i.e.", "approx.", "no.", "mg.", "ml.", "mcg.", "kg.", "wk.", "od.",
    "bd.", "tds.", "qds.", "prn.", "a.m.", "p.m.", "resp.", "temp.",
})
_INITIALISM_RE = re.compile(r"^(?:[0-9a-z]\.){2,}$")


def _ends_sentence(token: str) -> bool:
    word = token.rstrip("\"')]}")
    if not word or word[-1] not in ".!?":
        return False
    folded = word.casefold().lstrip("\"'([{")
    if folded in _ABBREVIATIONS or _INITIALISM_RE.match(folded):
        return False
    return True


def split_sentences(text: str) -> list[str]:
    """Deterministic, abbreviation-safe split on sentence terminators."""
    sentences: list[str] = []
    current: list[str] = []
    for token in text.split():
        current.append(token)
        if _ends_sentence(token):
            sentences.append(" ".join(current))
            current = []
    if current:
        sentences.append(" ".join(current))
    return sentences


def _source_for(kind: NoteKind) -> SegmentSource:
    return SegmentSource.GOLD_NOTE if kind is NoteKind.GOLD else SegmentSource.GENERATED_NOTE


def segment_note(note: ClinicalNote) -> list[Segment]:
    """Standalone sentences of the note, keeping section context as metadata."""
    source = _source_for(note.kind)
    segments: list[Segment] = []
    for key, statements in note.sections:
        for statement in statements:
            for sentence in split_sentences(statement):
                segments.append(
                    Segment(
                        id=f"{source.value}#{len(segments)}",
                        text=sentence,
                        source=source,
                        section=key,
                    )
                )
    return segments


def segment_transcript(buffer: TranscriptBuffer) -> list[Segment]:
    """One segment per transcript utterance (line), speaker prefix excluded."""
    segments: list[Segment] = []
    for text in buffer.utterance_texts():
        if not text.strip():
            continue
        segments.append(
            Segment(
                id=f"{SegmentSource.TRANSCRIPT.value}#{len(segments)}",
                text=text,
                source=SegmentSource.TRANSCRIPT,
            )
        )
    return segments


def segments_from_facts(facts) -> list[Segment]:
    """One segment per non-rejected fact, used by the intervention simulators."""
    segments: list[Segment] = []
    for fact in facts.active:
        segments.append(
            Segment(
                id=f"{SegmentSource.FACT_SET.value}#{fact.id}",
                text=fact.text,
                source=SegmentSource.FACT_SET,
            )
        )
    return segments


@dataclass(frozen=True)
class AlignmentEdge:
    left_id: str
    right_id: str
    label: int  # 1 = conveys the same meaning, 0 = contradiction or absence


@dataclass(frozen=True)
class AlignmentGraph:
    """Explicit bipartite labeling of every (query, candidate) pair."""

    left: tuple[Segment, ...]   # queries
    right: tuple[Segment, ...]  # candidates
    edges: tuple[AlignmentEdge, ...]

    def aligned_left_ids(self) -> set[str]:
        return {e.left_id for e in self.edges if e.label == 1}

    def aligned_right_ids(self) -> set[str]:
        return {e.right_id for e in self.edges if e.label == 1}

    def partners(self, left_id: str) -> set[str]:
        return {e.right_id for e in self.edges if e.left_id == left_id and e.label == 1}


def align(query: Segment, candidates: Sequence[Segment],
          backend: AlignmentModel) -> set[str]:
    """Ids of the candidates the judge labels as conveyed by the query."""
    if not candidates:
        return set()
    labels = backend.align(query.text, [c.text for c in candidates])
    return {c.id for c, ok in zip(candidates, labels) if ok}


def build_alignment(queries: Sequence[Segment], candidates: Sequence[Segment],
                    backend: AlignmentModel, max_workers: int = 4) -> AlignmentGraph:
    """Label all pairs, one judge call per query, bounded concurrency."""
    if not queries or not candidates:
        return AlignmentGraph(tuple(queries), tuple(candidates), ())

    texts = [c.text for c in candidates]

    def _one(query: Segment) -> list[bool]:
        return list(backend.align(query.text, texts))

    if len(queries) == 1 or max_workers == 1:
        rows = [_one(q) for q in queries]
    else:
        with ThreadPoolExecutor(max_workers=min(max_workers, len(queries))) as pool:
            rows = list(pool.map(_one, queries))

    edges = tuple(
        AlignmentEdge(q.id, c.id, 1 if ok else 0)
        for q, row in zip(queries, rows)
        for c, ok in zip(candidates, row)
    )
    return AlignmentGraph(tuple(queries), tuple(candidates), edges)


@dataclass(frozen=True)
class MetricResult:
    value: float
    covered: int
    total: int
    graph: AlignmentGraph

    def uncovered_texts(self) -> list[str]:
        covered = self.graph.aligned_left_ids()
        return [q.text for q in self.graph.left if q.id not in covered]


def _coverage(queries: Sequence[Segment], candidates: Sequence[Segment],
              backend: AlignmentModel, label: str) -> MetricResult:
    if not queries:
        raise MetricUndefinedError(f"{label}: no segments on the denominator side")
    graph = build_alignment(queries, candidates, backend)
    covered = len(graph.aligned_left_ids())
    return MetricResult(covered / len(queries), covered, len(queries), graph)


def completeness_detail(generated: ClinicalNote, gold: ClinicalNote,
                        backend: AlignmentModel) -> MetricResult:
    gold_segments = segment_note(gold)
    if not gold_segments:
        raise MetricUndefinedError("completeness: gold note has no segments")
    return _coverage(gold_segments, segment_note(generated), backend, "completeness")


def completeness(generated: ClinicalNote, gold: ClinicalNote,
                 backend: AlignmentModel) -> float:
    return completeness_detail(generated, gold, backend).value


def conciseness_detail(generated: ClinicalNote, gold: ClinicalNote,
                       backend: AlignmentModel) -> MetricResult:
    generated_segments = segment_note(generated)
    if not generated_segments:
        raise MetricUndefinedError("conciseness: generated note has no segments")
    return _coverage(generated_segments, segment_note(gold), backend, "conciseness")


def conciseness(generated: ClinicalNote, gold: ClinicalNote,
                backend: AlignmentModel) -> float:
    return conciseness_detail(generated, gold, backend).value


def groundedness_detail(note: ClinicalNote, transcript: TranscriptBuffer,
                        backend: AlignmentModel) -> MetricResult:
    note_segments = segment_note(note)
    if not note_segments:
        raise MetricUndefinedError("groundedness: note has no segments")
    return _coverage(note_segments, segment_transcript(transcript), backend,
                     "groundedness")


def groundedness(note: ClinicalNote, transcript: TranscriptBuffer,
                 backend: AlignmentModel) -> float:
    return groundedness_detail(note, transcript, backend).value


def adjusted_completeness(completeness_value: float, gold_groundedness: float) -> float:
    """Completeness rescaled by the gold note's own groundedness, capped at 1."""
    if gold_groundedness <= 0:
        raise MetricUndefinedError(
            "adjusted completeness: gold groundedness must be > 0"
        )
    return min(completeness_value / gold_groundedness, 1.0)


@dataclass(frozen=True)
class CalibrationResult:
    passed: bool
    completeness: float
    conciseness: float
    failures: tuple[str, ...]  # texts of segments that did not align with the note itself

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "completeness": self.completeness,
            "conciseness": self.conciseness,
            "failures": list(self.failures),
        }


def calibrate(gold: ClinicalNote, backend: AlignmentModel) -> CalibrationResult:
    """Check the judge against the reference note aligned with itself.

    Both self-completeness and self-conciseness must be exactly 1.0; any
    other value indicates broken segmentation or a judge that is not even
    reflexive, and the offending segments are reported.
    """
    comp = completeness_detail(gold, gold, backend)
    conc = conciseness_detail(gold, gold, backend)
    failures = tuple(dict.fromkeys(comp.uncovered_texts() + conc.uncovered_texts()))
    return CalibrationResult(
        passed=comp.value == 1.0 and conc.value == 1.0,
        completeness=comp.value,
        conciseness=conc.value,
        failures=failures,
    )
