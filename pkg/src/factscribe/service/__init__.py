from .app import create_app
from .sessions import (
    Phase,
    PhaseError,
    Session,
    SessionConfig,
    SessionManager,
    UnknownSessionError,
)

__all__ = [
    "Phase",
    "PhaseError",
    "Session",
    "SessionConfig",
    "SessionManager",
    "UnknownSessionError",
    "create_app",
]
