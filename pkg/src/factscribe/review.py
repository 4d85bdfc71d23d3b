"""Clinician-in-the-loop edits and their simulated counterparts.

Live edits are rejects (one click in a review interface) and adds (one
dictated sentence). The simulators reproduce those edits from the reference
note: filtering rejects every fact that does not align with any gold
segment, augmentation adds a clinician fact for every gold segment not
covered by the remaining facts. Filtering never adds facts, augmentation
never removes them, and after augmentation every gold segment aligns with
at least one non-rejected fact under the same judge.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum

from .align import Segment, build_alignment, segment_note, segments_from_facts
from .backends.base import AlignmentModel
from .facts import (
    Fact,
    FactOrigin,
    FactSet,
    FactStatus,
    UnknownFactError,
    tombstone,
)
from .notes import ClinicalNote


class EditKind(str, Enum):
    REJECT_FACT = "reject_fact"
    ADD_FACT = "add_fact"


class EditActor(str, Enum):
    HUMAN = "human"
    SIMULATOR = "simulator"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass(frozen=True)
class EditEvent:
    session_id: str
    kind: EditKind
    fact_id: str
    text: str = ""
    actor: EditActor = EditActor.HUMAN
    at: str = ""
    applied: bool = True

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "kind": self.kind.value,
            "fact_id": self.fact_id,
            "text": self.text,
            "actor": self.actor.value,
            "at": self.at,
            "applied": self.applied,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EditEvent":
        return cls(
            session_id=data.get("session_id", ""),
            kind=EditKind(data["kind"]),
            fact_id=data.get("fact_id", ""),
            text=data.get("text", ""),
            actor=EditActor(data.get("actor", "human")),
            at=data.get("at", ""),
            applied=bool(data.get("applied", True)),
        )


def reject_fact(facts: FactSet, fact_id: str, session_id: str = "",
                actor: EditActor = EditActor.HUMAN) -> tuple[FactSet, EditEvent]:
    """Tombstone a fact. Rejecting an already-rejected fact is a flagged
    no-op: the set (and its revision) is returned unchanged."""
    fact = facts.get(fact_id)
    if fact is None:
        raise UnknownFactError(f"no fact with id {fact_id!r}")
    if fact.is_rejected:
        event = EditEvent(session_id, EditKind.REJECT_FACT, fact_id,
                          actor=actor, at=_now(), applied=False)
        return facts, event
    merged = facts.merge([tombstone(fact)])
    event = EditEvent(session_id, EditKind.REJECT_FACT, fact_id,
                      actor=actor, at=_now(), applied=True)
    return merged, event


def add_fact(facts: FactSet, text: str, session_id: str = "",
             actor: EditActor = EditActor.HUMAN) -> tuple[FactSet, EditEvent]:
    """Append a clinician-added, pre-accepted fact.

    The text itself is the single info unit; clinician facts never carry
    refinement history. Adding text that duplicates a live fact is skipped
    by the merge and reported as applied=False.
    """
    if not text.strip():
        raise ValueError("fact text must be non-empty")
    fact_id = f"f{facts.next_ordinal():04d}"
    fact = Fact(
        id=fact_id,
        text=text.strip(),
        info_units=(text.strip(),),
        origin=FactOrigin.CLINICIAN_ADDED,
        status=FactStatus.ACCEPTED,
    )
    merged = facts.merge([fact])
    applied = merged.get(fact_id) is not None
    event = EditEvent(session_id, EditKind.ADD_FACT, fact_id, text=text.strip(),
                      actor=actor, at=_now(), applied=applied)
    return merged, event


def _gold_segments(gold: ClinicalNote) -> list[Segment]:
    segments = segment_note(gold)
    if not segments:
        raise ValueError("gold note has no segments")
    return segments


def _fact_id_of(segment: Segment) -> str:
    return segment.id.split("#", 1)[1]


def simulate_filtering(facts: FactSet, gold: ClinicalNote, backend: AlignmentModel,
                       session_id: str = "") -> tuple[FactSet, list[EditEvent]]:
    """Reject every fact that aligns with no gold segment, in one batch."""
    gold_segments = _gold_segments(gold)
    fact_segments = segments_from_facts(facts)
    if not fact_segments:
        return facts, []

    graph = build_alignment(fact_segments, gold_segments, backend)
    covered = graph.aligned_left_ids()
    doomed = [facts.get(_fact_id_of(s)) for s in fact_segments if s.id not in covered]
    if not doomed:
        return facts, []

    merged = facts.merge([tombstone(f) for f in doomed])
    events = [
        EditEvent(session_id, EditKind.REJECT_FACT, f.id,
                  actor=EditActor.SIMULATOR, at=_now(), applied=True)
        for f in doomed
    ]
    return merged, events


def simulate_augmentation(facts: FactSet, gold: ClinicalNote, backend: AlignmentModel,
                          session_id: str = "") -> tuple[FactSet, list[EditEvent]]:
    """Add a clinician fact (gold segment text, verbatim) for every gold
    segment not covered by the current non-rejected facts.

    Meant to run on an already-filtered set; applying it first merely adds
    the same facts against a noisier baseline.
    """
    gold_segments = _gold_segments(gold)
    fact_segments = segments_from_facts(facts)

    graph = build_alignment(gold_segments, fact_segments, backend)
    covered = graph.aligned_left_ids()
    missing = [s for s in gold_segments if s.id not in covered]
    if not missing:
        return facts, []

    ordinal = facts.next_ordinal()
    batch = []
    for offset, segment in enumerate(missing):
        batch.append(
            Fact(
                id=f"f{ordinal + offset:04d}",
                text=segment.text,
                info_units=(segment.text,),
                origin=FactOrigin.CLINICIAN_ADDED,
                status=FactStatus.ACCEPTED,
            )
        )
    merged = facts.merge(batch)
    events = [
        EditEvent(session_id, EditKind.ADD_FACT, f.id, text=f.text,
                  actor=EditActor.SIMULATOR, at=_now(),
                  applied=merged.get(f.id) is not None)
        for f in batch
    ]
    return merged, events
