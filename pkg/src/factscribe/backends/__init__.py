from .base import (
    AlignmentModel,
    Backends,
    ContractViolation,
    DraftModel,
    EvaluatorModel,
    ModelRole,
    NoteModel,
    RefinerModel,
    TransportError,
)
from .mock import MockModel, MockRules, default_rules

__all__ = [
    "AlignmentModel",
    "Backends",
    "ContractViolation",
    "DraftModel",
    "EvaluatorModel",
    "MockModel",
    "MockRules",
    "ModelRole",
    "NoteModel",
    "RefinerModel",
    "TransportError",
    "default_rules",
]
