"""HTTP client for a remote inference service.

One request shape for every role:

    POST <url>
    {"role": "<role>", "operation": "<op>", "inputs": {...}, "config": {}}

responds ``{"outputs": {...}}`` with per-operation schemas (see
docs/api.md). One retry with exponential backoff by default, then the
failure surfaces as a TransportError; a failed call never mutates engine
state because the engine merges only after a window completes.
"""

from __future__ import annotations

import threading
import time
from typing import Sequence

import httpx

from .backends.base import ModelRole, TransportError
from .config import BackendSpec
from .facts import CriterionVerdict, Fact, FactSet, FactStatus
from .notes import NoteTemplate
from .windowing import TranscriptBuffer, Window


def window_to_dict(window: Window) -> dict:
    return {
        "start": window.start,
        "end": window.end,
        "is_final": window.is_final,
        "tokens": [
            {
                "text": t.text,
                "index": t.index,
                "speaker": t.speaker.value if t.speaker else None,
                "utterance": t.utterance,
            }
            for t in window.tokens
        ],
    }


def template_to_dict(template: NoteTemplate) -> dict:
    return {
        "name": template.name,
        "preamble": template.preamble,
        "sections": [
            {"key": s.key, "title": s.title, "guidance": s.guidance}
            for s in template.sections
        ],
    }


class RemoteBackend:
    """Client for one role of the inference service."""

    def __init__(self, role: ModelRole, spec: BackendSpec, transport=None):
        self.role = role
        self.spec = spec
        self._client = httpx.Client(timeout=spec.timeout, transport=transport)
        self._slots = threading.Semaphore(spec.max_concurrency)

    def close(self) -> None:
        self._client.close()

    def _call(self, operation: str, inputs: dict) -> dict:
        body = {
            "role": self.role.value,
            "operation": operation,
            "inputs": inputs,
            "config": {},
        }
        headers = {}
        if self.spec.auth_token:
            headers["Authorization"] = f"Bearer {self.spec.auth_token}"

        last_error: Exception | None = None
        for attempt in range(self.spec.retries + 1):
            if attempt:
                time.sleep(0.25 * 2 ** (attempt - 1))
            try:
                with self._slots:
                    response = self._client.post(self.spec.url, json=body, headers=headers)
                response.raise_for_status()
                payload = response.json()
                return payload["outputs"]
            except (httpx.HTTPError, ValueError, KeyError) as exc:
                last_error = exc
        raise TransportError(
            f"{self.role.value}.{operation} failed after "
            f"{self.spec.retries + 1} attempts: {last_error}",
            role=self.role,
        ) from last_error

    # -- role operations ----------------------------------------------------

    def draft_facts(self, window: Window, existing: FactSet) -> list[Fact]:
        outputs = self._call(
            "draft_facts",
            {"window": window_to_dict(window), "existing": existing.to_dict()},
        )
        facts = []
        for item in outputs.get("facts", ()):
            facts.append(
                Fact(
                    id=item.get("id", ""),
                    text=item["text"],
                    info_units=tuple(item.get("info_units") or (item["text"],)),
                    status=FactStatus.DRAFT,
                )
            )
        return facts

    def evaluate_fact(self, fact: Fact, window: Window,
                      existing: FactSet | None = None) -> list[CriterionVerdict]:
        outputs = self._call(
            "evaluate_fact",
            {
                "fact": fact.to_dict(),
                "window": window_to_dict(window),
                "existing": existing.to_dict() if existing is not None else None,
            },
        )
        return [CriterionVerdict.from_dict(v) for v in outputs["verdicts"]]

    def refine_fact(self, fact: Fact, verdicts: Sequence[CriterionVerdict],
                    window: Window) -> Fact:
        outputs = self._call(
            "refine_fact",
            {
                "fact": fact.to_dict(),
                "verdicts": [v.to_dict() for v in verdicts],
                "window": window_to_dict(window),
            },
        )
        revised = outputs["fact"]
        return Fact(
            id=fact.id,
            text=revised["text"],
            info_units=tuple(revised.get("info_units") or ()),
            origin=fact.origin,
            status=FactStatus.DRAFT,
            window_span=fact.window_span,
            refinement_count=int(revised.get("refinement_count", fact.refinement_count + 1)),
        )

    def generate_note(self, source: FactSet | TranscriptBuffer,
                      template: NoteTemplate) -> str:
        if isinstance(source, FactSet):
            inputs = {
                "source_kind": "facts",
                "facts": source.to_dict(),
                "template": template_to_dict(template),
            }
        else:
            inputs = {
                "source_kind": "transcript",
                "transcript": {"utterances": source.utterance_texts()},
                "template": template_to_dict(template),
            }
        return self._call("generate_note", inputs)["text"]

    def align(self, query: str, candidates: Sequence[str]) -> list[bool]:
        outputs = self._call(
            "align", {"query": query, "candidates": list(candidates)}
        )
        labels = [bool(v) for v in outputs["labels"]]
        if len(labels) != len(candidates):
            raise TransportError(
                f"alignment returned {len(labels)} labels for {len(candidates)} candidates",
                role=self.role,
            )
        return labels
