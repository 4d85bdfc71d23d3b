"""Live consultation sessions: state machine, delta stream, persistence.

A session moves open -> reviewing -> finalized. Transcript appends are only
legal while open; edits while open or reviewing; finalization happens once
and is idempotent afterwards. Every fact-set transition is recorded as a
delta (revision plus the facts that changed), so concatenating all deltas
from revision 0 reconstructs the current set exactly — that is the contract
the watch stream and the review client rely on.

Persistence is an append-only JSON-lines event log per session (chunks,
merges, edits, phase changes, notes) with periodic snapshots. Appends are
acknowledged only after the log write is flushed to disk; recovery replays
the snapshot plus the log tail, and because recorded merges are replayed
verbatim no backend is consulted while restoring.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from ..backends.base import Backends
from ..facts import Fact, FactSet
from ..notes import ClinicalNote, NoteKind, NoteTemplate, render_from_facts
from ..refine import PipelineSession, RefinementConfig
from ..review import EditActor, EditEvent, EditKind, add_fact, reject_fact
from ..windowing import WindowConfig


logger = logging.getLogger("factscribe.service")


class UnknownSessionError(Exception):
    pass


class PhaseError(Exception):
    pass


class Phase(str, Enum):
    OPEN = "open"
    REVIEWING = "reviewing"
    FINALIZED = "finalized"


@dataclass(frozen=True)
class SessionConfig:
    window: WindowConfig = field(default_factory=WindowConfig)
    refine: RefinementConfig = field(default_factory=RefinementConfig)
    template: str = "general"

    def to_dict(self) -> dict:
        return {
            "window": self.window.to_dict(),
            "refine": self.refine.to_dict(),
            "template": self.template,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        return cls(
            window=WindowConfig.from_dict(data.get("window", {})),
            refine=RefinementConfig.from_dict(data.get("refine", {})),
            template=data.get("template", "general"),
        )


class SessionLog:
    """Append-only JSONL event log with periodic snapshots."""

    def __init__(self, path: Path, snapshot_every: int = 50):
        self.path = path
        self.snapshot_path = path.with_suffix(".snapshot.json")
        self.snapshot_every = snapshot_every
        self._seq = 0
        self._since_snapshot = 0

    def append(self, event: dict) -> int:
        self._seq += 1
        record = {"seq": self._seq, **event}
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self._since_snapshot += 1
        return self._seq

    def snapshot(self, state: dict) -> None:
        payload = {"seq": self._seq, "state": state}
        tmp = self.snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")
        tmp.replace(self.snapshot_path)
        self._since_snapshot = 0

    def snapshot_due(self) -> bool:
        return self._since_snapshot >= self.snapshot_every

    @staticmethod
    def read_events(path: Path) -> list[dict]:
        events = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(json.loads(line))
        return events

    def adopt(self, seq: int) -> None:
        """Continue an existing log from the given sequence number."""
        self._seq = seq
        self._since_snapshot = 0


class Session:
    """One live consultation; all mutations serialize through one lock."""

    def __init__(self, session_id: str, config: SessionConfig, backends: Backends,
                 log: SessionLog | None = None):
        self.id = session_id
        self.config = config
        self.backends = backends
        self.phase = Phase.OPEN
        self.pipeline = PipelineSession(config.window, config.refine, backends)
        self.edits: list[EditEvent] = []
        self.deltas: list[dict] = []
        self.final_note: ClinicalNote | None = None
        self._lock = threading.RLock()
        self._log = log
        self._watchers = threading.Condition(self._lock)

    # -- views ---------------------------------------------------------------

    @property
    def facts(self) -> FactSet:
        return self.pipeline.facts

    @property
    def revision(self) -> int:
        return self.pipeline.facts.revision

    def state(self) -> dict:
        with self._lock:
            return {
                "id": self.id,
                "phase": self.phase.value,
                "revision": self.revision,
                "token_count": self.pipeline.buffer.n,
                "last_processed_end": self.pipeline.last_processed_end,
                "edit_counts": self.edit_counts(),
                "config": self.config.to_dict(),
            }

    def edit_counts(self) -> dict:
        applied = [e for e in self.edits if e.applied]
        return {
            "rejected": sum(1 for e in applied if e.kind is EditKind.REJECT_FACT),
            "added": sum(1 for e in applied if e.kind is EditKind.ADD_FACT),
        }

    def deltas_since(self, revision: int) -> list[dict]:
        with self._lock:
            return [d for d in self.deltas if d["revision"] > revision]

    def wait_for_delta(self, revision: int, timeout: float) -> list[dict]:
        """Deltas newer than ``revision``, blocking up to timeout for one."""
        with self._watchers:
            fresh = [d for d in self.deltas if d["revision"] > revision]
            if fresh:
                return fresh
            self._watchers.wait(timeout)
            return [d for d in self.deltas if d["revision"] > revision]

    # -- mutations -----------------------------------------------------------

    def _record_merge(self, before: FactSet) -> None:
        after = self.pipeline.facts
        delta = {
            "revision": after.revision,
            "facts": [f.to_dict() for f in after.diff_from(before)],
        }
        self.deltas.append(delta)
        self._append_log({
            "event": "merge",
            **delta,
            "last_processed_end": self.pipeline.last_processed_end,
        })
        self._watchers.notify_all()

    def _append_log(self, event: dict) -> None:
        if self._log is None:
            return
        self._log.append(event)
        if self._log.snapshot_due():
            self._log.snapshot(self._snapshot_state())

    def append_transcript(self, text: str) -> dict:
        with self._lock:
            if self.phase is not Phase.OPEN:
                raise PhaseError(f"transcript append requires an open session, "
                                 f"phase is {self.phase.value}")
            self._append_log({"event": "chunk", "text": text})
            before_revision = self.revision
            accepted, records = self.pipeline.feed(text)
            for record in records:
                delta = {"revision": record.revision,
                         "facts": [f.to_dict() for f in record.changed]}
                self.deltas.append(delta)
                self._append_log({
                    "event": "merge",
                    **delta,
                    "last_processed_end": record.window_end,
                })
            if records:
                self._watchers.notify_all()
            logger.info(
                "transcript appended session=%s tokens=%s..%s merges=%d revision=%d",
                self.id, accepted[0], accepted[1], len(records), self.revision,
            )
            return {
                "first": accepted[0],
                "last": accepted[1],
                "revision": self.revision,
                "last_processed_end": self.pipeline.last_processed_end,
                "merges": self.revision - before_revision,
            }

    def apply_edit(self, kind: EditKind, fact_id: str = "", text: str = "",
                   actor: EditActor = EditActor.HUMAN) -> dict:
        with self._lock:
            if self.phase is Phase.FINALIZED:
                raise PhaseError("session is finalized; no further edits")
            before = self.facts
            if kind is EditKind.REJECT_FACT:
                new_facts, event = reject_fact(before, fact_id, self.id, actor)
            else:
                new_facts, event = add_fact(before, text, self.id, actor)
            self.edits.append(event)
            self._append_log({"event": "edit", **event.to_dict()})
            logger.info(
                "edit session=%s kind=%s fact=%s applied=%s",
                self.id, event.kind.value, event.fact_id, event.applied,
            )
            if new_facts.revision != before.revision:
                self.pipeline.facts = new_facts
                self._record_merge(before)
            return {
                "revision": self.revision,
                "applied": event.applied,
                "fact_id": event.fact_id,
            }

    def close(self) -> dict:
        """End transcription: process the closing window, enter review."""
        with self._lock:
            if self.phase is Phase.FINALIZED:
                raise PhaseError("session is finalized")
            if self.phase is Phase.OPEN:
                before = self.facts
                records = self.pipeline.close()
                for record in records:
                    delta = {"revision": record.revision,
                             "facts": [f.to_dict() for f in record.changed]}
                    self.deltas.append(delta)
                    self._append_log({
                        "event": "merge",
                        **delta,
                        "last_processed_end": record.window_end,
                    })
                if records:
                    self._watchers.notify_all()
                self.phase = Phase.REVIEWING
                self._append_log({"event": "phase", "phase": self.phase.value})
                logger.info("session closed session=%s revision=%d", self.id, self.revision)
            return {"phase": self.phase.value, "revision": self.revision,
                    "last_processed_end": self.pipeline.last_processed_end}

    def finalize(self, template: NoteTemplate) -> ClinicalNote:
        with self._lock:
            if self.phase is Phase.FINALIZED:
                return self.final_note
            if self.phase is Phase.OPEN:
                self.close()
            note = render_from_facts(self.facts, template,
                                     self.backends.note_generator,
                                     kind=NoteKind.FROM_FACTS)
            self.final_note = note
            self.phase = Phase.FINALIZED
            self._append_log({"event": "note", "note": note.to_dict(),
                              "raw_text": note.raw_text})
            self._append_log({"event": "phase", "phase": self.phase.value})
            logger.info("session finalized session=%s revision=%d", self.id, self.revision)
            return note

    # -- persistence ----------------------------------------------------------

    def _snapshot_state(self) -> dict:
        return {
            "id": self.id,
            "config": self.config.to_dict(),
            "phase": self.phase.value,
            "chunks": list(self.pipeline.buffer.chunks),
            "facts": self.facts.to_dict(),
            "last_processed_end": self.pipeline.last_processed_end,
            "deltas": self.deltas,
            "edits": [e.to_dict() for e in self.edits],
            "note": self.final_note.to_dict() if self.final_note else None,
            "note_raw": self.final_note.raw_text if self.final_note else "",
        }

    def _restore_state(self, state: dict) -> None:
        for chunk in state.get("chunks", ()):
            self.pipeline.buffer.feed(chunk)
        self.pipeline.facts = FactSet.from_dict(state["facts"])
        self.pipeline.last_processed_end = int(state["last_processed_end"])
        self.deltas = list(state.get("deltas", ()))
        self.edits = [EditEvent.from_dict(e) for e in state.get("edits", ())]
        self.phase = Phase(state.get("phase", "open"))
        if state.get("note"):
            note = ClinicalNote.from_dict(state["note"])
            self.final_note = ClinicalNote(
                kind=note.kind, sections=note.sections,
                raw_text=state.get("note_raw", ""),
            )
        if self.phase is not Phase.OPEN:
            self.pipeline.closed = True

    def _apply_event(self, event: dict) -> None:
        name = event["event"]
        if name == "chunk":
            self.pipeline.buffer.feed(event["text"])
        elif name == "merge":
            batch = [Fact.from_dict(d) for d in event["facts"]]
            merged = self.facts.merge(batch)
            if merged.revision != event["revision"]:
                raise RuntimeError(
                    f"session {self.id}: replay revision mismatch "
                    f"({merged.revision} != {event['revision']})"
                )
            self.pipeline.facts = merged
            self.pipeline.last_processed_end = event.get(
                "last_processed_end", self.pipeline.last_processed_end
            )
            self.deltas.append({"revision": event["revision"], "facts": event["facts"]})
        elif name == "edit":
            self.edits.append(EditEvent.from_dict(event))
        elif name == "phase":
            self.phase = Phase(event["phase"])
            if self.phase is not Phase.OPEN:
                self.pipeline.closed = True
        elif name == "note":
            note = ClinicalNote.from_dict(event["note"])
            self.final_note = ClinicalNote(
                kind=note.kind, sections=note.sections,
                raw_text=event.get("raw_text", ""),
            )

    @classmethod
    def restore(cls, session_id: str, backends: Backends, log_path: Path,
                snapshot_every: int = 50) -> "Session":
        """Rebuild a session from its snapshot and/or event log; no backend
        call is made — recorded merges are replayed verbatim."""
        events = SessionLog.read_events(log_path)
        if not events or events[0].get("event") != "created":
            raise RuntimeError(f"{log_path}: no creation event")
        config = SessionConfig.from_dict(events[0].get("config", {}))
        session = cls(session_id, config, backends, log=None)

        start_seq = 0
        snapshot_path = log_path.with_suffix(".snapshot.json")
        if snapshot_path.exists():
            payload = json.loads(snapshot_path.read_text(encoding="utf-8"))
            session._restore_state(payload["state"])
            start_seq = payload["seq"]

        for event in events:
            if event["seq"] > start_seq:
                session._apply_event(event)

        log = SessionLog(log_path, snapshot_every=snapshot_every)
        log.adopt(events[-1]["seq"])
        session._log = log
        return session


class SessionManager:
    """All live sessions of one service process."""

    def __init__(self, backends: Backends, defaults: SessionConfig | None = None,
                 persist_dir: str | Path = "", snapshot_every: int = 50):
        self.backends = backends
        self.defaults = defaults or SessionConfig()
        self.persist_dir = Path(persist_dir) if persist_dir else None
        self.snapshot_every = snapshot_every
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        if self.persist_dir is not None:
            self.persist_dir.mkdir(parents=True, exist_ok=True)
            self.recover()

    def create(self, config: SessionConfig | None = None) -> Session:
        config = config or self.defaults
        session_id = uuid.uuid4().hex[:12]
        log = None
        if self.persist_dir is not None:
            log = SessionLog(self.persist_dir / f"{session_id}.log",
                             snapshot_every=self.snapshot_every)
        session = Session(session_id, config, self.backends, log=log)
        if log is not None:
            log.append({"event": "created", "config": config.to_dict()})
        with self._lock:
            self._sessions[session_id] = session
        logger.info("session created session=%s persisted=%s", session_id,
                    log is not None)
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(f"no session {session_id!r}")
        return session

    def ids(self) -> list[str]:
        with self._lock:
            return sorted(self._sessions)

    def recover(self) -> list[str]:
        """Restore every persisted session found in the persistence directory."""
        restored = []
        for log_path in sorted(self.persist_dir.glob("*.log")):
            session_id = log_path.stem
            with self._lock:
                if session_id in self._sessions:
                    continue
            session = Session.restore(session_id, self.backends, log_path,
                                      snapshot_every=self.snapshot_every)
            with self._lock:
                self._sessions[session_id] = session
            restored.append(session_id)
            logger.info("session recovered session=%s revision=%d phase=%s",
                        session_id, session.revision, session.phase.value)
        return restored
