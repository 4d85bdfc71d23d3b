"""Real-time clinical fact extraction with agentic self-refinement,
template-driven note generation, and an alignment-based evaluation harness."""

from .align import (
    AlignmentGraph,
    CalibrationResult,
    MetricUndefinedError,
    Segment,
    adjusted_completeness,
    calibrate,
    completeness,
    conciseness,
    groundedness,
    segment_note,
    segment_transcript,
)
from .backends import Backends, MockModel, ModelRole, TransportError
from .facts import (
    CriterionVerdict,
    Fact,
    FactOrigin,
    FactSet,
    FactStatus,
    normalize_text,
)
from .notes import (
    ClinicalNote,
    NoteKind,
    NoteTemplate,
    builtin_template,
    load_template,
    parse_note,
    render_from_facts,
    render_from_transcript,
)
from .refine import (
    PipelineSession,
    RefinementConfig,
    RefinementTrace,
    refine_window,
    run_incremental,
)
from .review import (
    EditActor,
    EditEvent,
    EditKind,
    add_fact,
    reject_fact,
    simulate_augmentation,
    simulate_filtering,
)
from .windowing import (
    Speaker,
    Token,
    TranscriptBuffer,
    Window,
    WindowConfig,
    due_windows,
    enumerate_windows,
    final_window,
)

__version__ = "0.1.0"
