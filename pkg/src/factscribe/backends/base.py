"""Backend abstraction for the five model roles.

Every model the pipeline consults — fact drafting, per-fact evaluation,
fact refinement, note generation, and the alignment judge — sits behind one
of these protocols. The deterministic mock backend implements all five for
hermetic tests; the remote client speaks the documented HTTP contract. A
role binds to exactly one backend per session, and a failed backend call
must never leave engine state changed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Protocol, Sequence, runtime_checkable

from ..facts import CriterionVerdict, Fact, FactSet

if TYPE_CHECKING:  # pragma: no cover
    from ..notes import NoteTemplate
    from ..windowing import TranscriptBuffer, Window


class ModelRole(str, Enum):
    DRAFT = "draft"
    EVALUATOR = "evaluator"
    REFINER = "refiner"
    NOTE_GENERATOR = "note_generator"
    ALIGNMENT = "alignment"


class TransportError(Exception):
    """A backend was unreachable or timed out; retryable, distinct from
    an empty-but-successful result."""

    def __init__(self, message: str, role: "ModelRole | None" = None):
        super().__init__(message)
        self.role = role


class ContractViolation(Exception):
    """A backend operation was invoked outside its precondition."""


@runtime_checkable
class DraftModel(Protocol):
    def draft_facts(self, window: "Window", existing: FactSet) -> list[Fact]:
        """Candidate facts grounded in the window; new facts carry an empty id,
        revisions carry the id of the fact they update."""
        ...


@runtime_checkable
class EvaluatorModel(Protocol):
    def evaluate_fact(self, fact: Fact, window: "Window",
                      existing: FactSet | None = None) -> list[CriterionVerdict]:
        """One verdict per configured criterion for a draft fact."""
        ...


@runtime_checkable
class RefinerModel(Protocol):
    def refine_fact(self, fact: Fact, verdicts: Sequence[CriterionVerdict],
                    window: "Window") -> Fact:
        """Revised fact with the same id and refinement_count incremented."""
        ...


@runtime_checkable
class NoteModel(Protocol):
    def generate_note(self, source: "FactSet | TranscriptBuffer",
                      template: "NoteTemplate") -> str:
        """Raw note text containing every template section header exactly once."""
        ...


@runtime_checkable
class AlignmentModel(Protocol):
    def align(self, query: str, candidates: Sequence[str]) -> list[bool]:
        """Binary label per candidate: True when the query's meaning is present
        in the candidate; False covers contradiction and absence alike."""
        ...


@dataclass
class Backends:
    """The per-session binding of roles to backend instances."""

    draft: DraftModel
    evaluator: EvaluatorModel
    refiner: RefinerModel
    note_generator: NoteModel
    aligner: AlignmentModel

    @classmethod
    def all_mock(cls, rules=None) -> "Backends":
        from .mock import MockModel

        mock = MockModel(rules)
        return cls(draft=mock, evaluator=mock, refiner=mock,
                   note_generator=mock, aligner=mock)
