"""The per-window draft / evaluate / refine loop and the incremental driver.

Each due window is processed as one atomic step: the draft model proposes
candidate facts, every candidate runs its own bounded evaluate-refine loop
(in parallel, merge order fixed by draft order), and the survivors are
merged into the accumulated fact set. A candidate is accepted the first
time every criterion passes; a candidate that exhausts its refinement
budget without passing is discarded, never merged as accepted. Any backend
failure aborts the whole window with the fact set left at its prior
revision.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

from .backends.base import Backends
from .facts import (
    CriterionVerdict,
    Fact,
    FactSet,
    FactStatus,
    MalformedBatchError,
    tombstone,
)
from .windowing import (
    TranscriptBuffer,
    Window,
    WindowConfig,
    due_windows,
    final_window,
)

ACTION_ACCEPTED = "accepted"
ACTION_REFINED = "refined"
OUTCOME_ACCEPTED = "accepted"
OUTCOME_DISCARDED = "discarded"


@dataclass(frozen=True)
class RefinementConfig:
    """Bounds for the per-fact loop: at most n_max iterations, each being one
    evaluation optionally followed by one refinement."""

    n_max: int = 3
    parallelism_limit: int = 4

    def __post_init__(self) -> None:
        if self.n_max < 0:
            raise ValueError(f"n_max must be >= 0, got {self.n_max}")
        if self.parallelism_limit < 1:
            raise ValueError(
                f"parallelism_limit must be >= 1, got {self.parallelism_limit}"
            )

    def to_dict(self) -> dict:
        return {"n_max": self.n_max, "parallelism_limit": self.parallelism_limit}

    @classmethod
    def from_dict(cls, data: dict) -> "RefinementConfig":
        return cls(
            n_max=int(data.get("n_max", 3)),
            parallelism_limit=int(data.get("parallelism_limit", 4)),
        )


@dataclass(frozen=True)
class RefinementStep:
    step: int
    verdicts: tuple[CriterionVerdict, ...]
    action: str  # accepted | refined

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "action": self.action,
            "verdicts": [v.to_dict() for v in self.verdicts],
        }


@dataclass(frozen=True)
class FactTrace:
    fact_id: str
    draft_text: str
    final_text: str
    steps: tuple[RefinementStep, ...]
    outcome: str  # accepted | discarded

    @property
    def evaluations(self) -> int:
        return len(self.steps)

    @property
    def refinements(self) -> int:
        return sum(1 for s in self.steps if s.action == ACTION_REFINED)

    def to_dict(self) -> dict:
        return {
            "fact_id": self.fact_id,
            "draft_text": self.draft_text,
            "final_text": self.final_text,
            "outcome": self.outcome,
            "steps": [s.to_dict() for s in self.steps],
        }


@dataclass(frozen=True)
class RefinementTrace:
    window_start: int
    window_end: int
    is_final: bool
    facts: tuple[FactTrace, ...]
    elapsed_s: float

    def to_dict(self) -> dict:
        return {
            "window": {"start": self.window_start, "end": self.window_end,
                       "is_final": self.is_final},
            "elapsed_s": round(self.elapsed_s, 6),
            "facts": [f.to_dict() for f in self.facts],
        }


def _prepare_drafts(drafts: Sequence[Fact], facts: FactSet,
                    window: Window) -> list[Fact]:
    """Assign engine ids and window spans to raw draft candidates."""
    ids = [d.id for d in drafts if d.id]
    if len(ids) != len(set(ids)):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise MalformedBatchError(f"draft batch repeats ids: {dupes}")

    prepared = []
    ordinal = facts.next_ordinal()
    for draft in drafts:
        predecessor = facts.get(draft.id) if draft.id else None
        if predecessor is not None:
            fact_id = draft.id
            span = (predecessor.window_span[0], window.end)
        else:
            fact_id = draft.id or f"f{ordinal:04d}"
            if not draft.id:
                ordinal += 1
            span = (window.start, window.end)
        prepared.append(
            replace(
                draft,
                id=fact_id,
                status=FactStatus.DRAFT,
                window_span=span,
                refinement_count=0,
                criteria_log=(),
            )
        )
    return prepared


def _refine_one(draft: Fact, window: Window, facts: FactSet,
                cfg: RefinementConfig, backends: Backends) -> tuple[Fact, FactTrace]:
    """Run the bounded evaluate-refine loop for one candidate.

    Returns the candidate's final state (accepted, or still-draft when it
    exhausted its budget) together with its trace.
    """
    current = draft
    steps: list[RefinementStep] = []
    accepted = False

    n = 0
    while n < cfg.n_max:
        verdicts = tuple(backends.evaluator.evaluate_fact(current, window, existing=facts))
        if all(v.passed for v in verdicts):
            current = replace(current, status=FactStatus.ACCEPTED, criteria_log=verdicts)
            steps.append(RefinementStep(n, verdicts, ACTION_ACCEPTED))
            accepted = True
            break
        steps.append(RefinementStep(n, verdicts, ACTION_REFINED))
        refined = backends.refiner.refine_fact(current, verdicts, window)
        current = replace(refined, id=current.id, window_span=current.window_span)
        n += 1

    trace = FactTrace(
        fact_id=current.id,
        draft_text=draft.text,
        final_text=current.text,
        steps=tuple(steps),
        outcome=OUTCOME_ACCEPTED if accepted else OUTCOME_DISCARDED,
    )
    return current, trace


def refine_window(window: Window, facts: FactSet, cfg: RefinementConfig,
                  backends: Backends) -> tuple[FactSet, RefinementTrace]:
    """Process one window through the full draft / evaluate / refine cycle.

    Accepted candidates merge in draft order, so the result is identical
    whether the per-fact loops ran in parallel or sequentially. Discarded
    new candidates are kept as rejected tombstones for the audit trail;
    a discarded revision of an already-stored fact leaves its predecessor
    untouched.
    """
    started = time.monotonic()
    drafts = _prepare_drafts(backends.draft.draft_facts(window, facts), facts, window)

    results: list[tuple[Fact, FactTrace]]
    if len(drafts) <= 1 or cfg.parallelism_limit == 1:
        results = [_refine_one(d, window, facts, cfg, backends) for d in drafts]
    else:
        workers = min(cfg.parallelism_limit, len(drafts))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(lambda d: _refine_one(d, window, facts, cfg, backends), drafts)
            )

    batch: list[Fact] = []
    for final, trace in results:
        if trace.outcome == OUTCOME_ACCEPTED:
            batch.append(final)
        elif facts.get(final.id) is None:
            batch.append(tombstone(final))

    merged = facts.merge(batch)
    trace = RefinementTrace(
        window_start=window.start,
        window_end=window.end,
        is_final=window.is_final,
        facts=tuple(t for _, t in results),
        elapsed_s=time.monotonic() - started,
    )
    return merged, trace


@dataclass(frozen=True)
class MergeRecord:
    """One fact-set transition, as exposed to watchers and the event log."""

    revision: int
    changed: tuple[Fact, ...]
    window_start: int
    window_end: int
    trace: RefinementTrace | None = None

    def to_dict(self) -> dict:
        return {
            "revision": self.revision,
            "facts": [f.to_dict() for f in self.changed],
            "window": {"start": self.window_start, "end": self.window_end},
        }


class PipelineSession:
    """Streaming driver: feed transcript chunks, windows fire every x tokens.

    Keeps the resume checkpoint (``last_processed_end``): a backend failure
    aborts the current window and leaves both the fact set and the
    checkpoint at their previous values, so calling :meth:`process_due`
    again retries cleanly.
    """

    def __init__(self, cfg_window: WindowConfig, cfg_refine: RefinementConfig,
                 backends: Backends,
                 trace_sink: Callable[[RefinementTrace], None] | None = None):
        self.cfg_window = cfg_window
        self.cfg_refine = cfg_refine
        self.backends = backends
        self.buffer = TranscriptBuffer()
        self.facts = FactSet()
        self.last_processed_end = 0
        self.closed = False
        self._trace_sink = trace_sink

    def feed(self, text: str) -> tuple[tuple[int, int], list[MergeRecord]]:
        """Append a transcript chunk and process any windows that became due."""
        if self.closed:
            raise RuntimeError("session is closed")
        accepted = self.buffer.feed(text)
        return accepted, self.process_due()

    def process_due(self) -> list[MergeRecord]:
        records = []
        for window in due_windows(self.buffer, self.cfg_window, self.last_processed_end):
            records.append(self._process(window))
        return records

    def close(self) -> list[MergeRecord]:
        """Process the closing window (if pending) and seal the session."""
        records = self.process_due()
        window = final_window(self.buffer, self.cfg_window, self.last_processed_end)
        if window is not None:
            records.append(self._process(window))
        self.closed = True
        return records

    def _process(self, window: Window) -> MergeRecord:
        before = self.facts
        merged, trace = refine_window(window, before, self.cfg_refine, self.backends)
        self.facts = merged
        self.last_processed_end = window.end
        if self._trace_sink is not None:
            self._trace_sink(trace)
        return MergeRecord(
            revision=merged.revision,
            changed=merged.diff_from(before),
            window_start=window.start,
            window_end=window.end,
            trace=trace,
        )


def run_incremental(buffer: TranscriptBuffer, cfg_window: WindowConfig,
                    cfg_refine: RefinementConfig, backends: Backends,
                    trace_sink: Callable[[RefinementTrace], None] | None = None) -> FactSet:
    """Process a complete transcript through every due window plus the
    closing window, returning the final fact set.

    With deterministic backends this equals the result of feeding the same
    tokens through a :class:`PipelineSession` in chunks of any size.
    """
    facts = FactSet()
    last_end = 0
    for window in due_windows(buffer, cfg_window, 0):
        facts, trace = refine_window(window, facts, cfg_refine, backends)
        if trace_sink is not None:
            trace_sink(trace)
        last_end = window.end
    closing = final_window(buffer, cfg_window, last_end)
    if closing is not None:
        facts, trace = refine_window(closing, facts, cfg_refine, backends)
        if trace_sink is not None:
            trace_sink(trace)
    return facts
