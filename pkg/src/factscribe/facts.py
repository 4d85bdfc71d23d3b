"""Facts and fact-set semantics: identity, merge rules, text dedup.

A Fact is one atomic clinical finding carrying up to four discrete info
units. Fact sets are immutable values; every merge produces a new set with
the revision bumped by exactly one, which is what the session service and
the review client key their delta streams on. Rejected facts are kept as
tombstones, never deleted, so edits stay auditable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Sequence

MAX_INFO_UNITS = 4

_ID_RE = re.compile(r"^f(\d+)$")


class FactError(Exception):
    """Base class for fact-model violations."""


class MalformedBatchError(FactError):
    """A merge batch contained duplicate fact ids."""


class InvalidFactError(FactError):
    """A fact violates a storage invariant (unit bounds, origin rules)."""


class UnknownFactError(FactError):
    """An operation referenced a fact id that is not in the set."""


class FactOrigin(str, Enum):
    MODEL_EXTRACTED = "model_extracted"
    CLINICIAN_ADDED = "clinician_added"


class FactStatus(str, Enum):
    DRAFT = "draft"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


def normalize_text(text: str) -> str:
    """Case-fold, strip, and collapse internal whitespace runs to single spaces."""
    return " ".join(text.split()).casefold()


@dataclass(frozen=True)
class CriterionVerdict:
    """One evaluator criterion outcome; a fact passes when every verdict passes."""

    criterion: str
    passed: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "passed": self.passed, "note": self.note}

    @classmethod
    def from_dict(cls, data: dict) -> "CriterionVerdict":
        return cls(
            criterion=data["criterion"],
            passed=bool(data["passed"]),
            note=data.get("note", ""),
        )


@dataclass(frozen=True)
class Fact:
    """One atomic clinical finding.

    ``window_span`` is (first token index of the window that introduced the
    fact, last token index of the most recent window that supported it).
    Clinician-added facts use (0, 0) since they have no window provenance.
    ``criteria_log`` holds the verdicts from the last evaluation and is not
    part of the wire shape.
    """

    id: str
    text: str
    info_units: tuple[str, ...]
    origin: FactOrigin = FactOrigin.MODEL_EXTRACTED
    status: FactStatus = FactStatus.DRAFT
    window_span: tuple[int, int] = (0, 0)
    refinement_count: int = 0
    criteria_log: tuple[CriterionVerdict, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "info_units", tuple(self.info_units))
        object.__setattr__(self, "window_span", tuple(self.window_span))
        object.__setattr__(self, "criteria_log", tuple(self.criteria_log))

    @property
    def normalized_text(self) -> str:
        return normalize_text(self.text)

    @property
    def is_rejected(self) -> bool:
        return self.status is FactStatus.REJECTED

    def validate_storable(self) -> None:
        """Check the invariants a fact must satisfy to enter a FactSet.

        Rejected tombstones are exempt from the unit bounds: a draft may be
        discarded precisely because its units could not be brought into
        1..MAX_INFO_UNITS.
        """
        if not self.id:
            raise InvalidFactError("fact has no id")
        if self.refinement_count < 0:
            raise InvalidFactError(f"fact {self.id}: negative refinement_count")
        if not self.is_rejected:
            if not 1 <= len(self.info_units) <= MAX_INFO_UNITS:
                raise InvalidFactError(
                    f"fact {self.id}: {len(self.info_units)} info units, "
                    f"expected 1..{MAX_INFO_UNITS}"
                )
        if self.origin is FactOrigin.CLINICIAN_ADDED:
            if self.refinement_count != 0 or self.criteria_log:
                raise InvalidFactError(
                    f"fact {self.id}: clinician-added facts carry no refinement history"
                )

    def to_dict(self) -> dict:
        """Stable wire shape shared by the session service and the bench CLI."""
        return {
            "id": self.id,
            "text": self.text,
            "info_units": list(self.info_units),
            "origin": self.origin.value,
            "status": self.status.value,
            "window_span": list(self.window_span),
            "refinement_count": self.refinement_count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Fact":
        span = data.get("window_span") or (0, 0)
        return cls(
            id=data["id"],
            text=data["text"],
            info_units=tuple(data.get("info_units") or ()),
            origin=FactOrigin(data.get("origin", "model_extracted")),
            status=FactStatus(data.get("status", "draft")),
            window_span=(int(span[0]), int(span[1])),
            refinement_count=int(data.get("refinement_count", 0)),
        )


@dataclass(frozen=True)
class FactSet:
    """Ordered, immutable collection of facts with a monotone revision counter.

    Insertion order is stable across merges; replacements keep their slot.
    Among non-rejected facts, normalized texts are unique. On a collision the
    earliest stored fact wins: a colliding append is skipped and a colliding
    replacement keeps its predecessor.
    """

    facts: tuple[Fact, ...] = ()
    revision: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "facts", tuple(self.facts))

    def __iter__(self) -> Iterator[Fact]:
        return iter(self.facts)

    def __len__(self) -> int:
        return len(self.facts)

    @property
    def active(self) -> tuple[Fact, ...]:
        """All non-rejected facts, in insertion order."""
        return tuple(f for f in self.facts if not f.is_rejected)

    def get(self, fact_id: str) -> Fact | None:
        for f in self.facts:
            if f.id == fact_id:
                return f
        return None

    def without_rejected(self) -> "FactSet":
        """View with tombstones dropped; same revision, used for rendering."""
        return FactSet(self.active, self.revision)

    def next_ordinal(self) -> int:
        """Next free ordinal for engine-assigned ids of the form ``f<number>``."""
        highest = 0
        for f in self.facts:
            m = _ID_RE.match(f.id)
            if m:
                highest = max(highest, int(m.group(1)))
        return highest + 1

    def merge(self, batch: Sequence[Fact]) -> "FactSet":
        """Fold a batch of refined facts into the set.

        Facts whose id is already present replace their predecessor in
        place; new ids append at the end. The revision is bumped by exactly
        one, also for an empty batch. Collisions on normalized text among
        non-rejected facts resolve in favor of the fact already stored.
        """
        ids = [f.id for f in batch]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise MalformedBatchError(f"duplicate ids in batch: {dupes}")
        for f in batch:
            f.validate_storable()

        result = list(self.facts)
        index = {f.id: i for i, f in enumerate(result)}
        # normalized text -> fact id, for non-rejected facts currently in result
        claims: dict[str, str] = {
            f.normalized_text: f.id for f in result if not f.is_rejected
        }

        for f in batch:
            key = f.normalized_text
            if f.id in index:
                if not f.is_rejected and claims.get(key, f.id) != f.id:
                    continue  # text collides with another live fact; keep predecessor
                old = result[index[f.id]]
                if not old.is_rejected and claims.get(old.normalized_text) == old.id:
                    del claims[old.normalized_text]
                result[index[f.id]] = f
            else:
                if not f.is_rejected and key in claims:
                    continue  # duplicate content; never stored
                index[f.id] = len(result)
                result.append(f)
            if not f.is_rejected:
                claims[key] = f.id

        return FactSet(tuple(result), self.revision + 1)

    def diff_from(self, older: "FactSet") -> tuple[Fact, ...]:
        """Facts added or changed relative to ``older``, in insertion order."""
        before = {f.id: f for f in older.facts}
        return tuple(f for f in self.facts if before.get(f.id) != f)

    def to_dict(self) -> dict:
        return {"revision": self.revision, "facts": [f.to_dict() for f in self.facts]}

    def to_json(self) -> str:
        """Canonical byte-stable serialization used by equivalence tests."""
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "FactSet":
        return cls(
            facts=tuple(Fact.from_dict(d) for d in data.get("facts", ())),
            revision=int(data.get("revision", 0)),
        )


def tombstone(fact: Fact) -> Fact:
    """Rejected copy of a fact, preserving everything else for the audit trail."""
    return replace(fact, status=FactStatus.REJECTED)
