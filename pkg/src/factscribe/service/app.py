"""HTTP/JSON session API with a server-sent-event fact stream.

Endpoints (schemas in docs/api.md):

    POST /sessions                      create a session
    GET  /sessions/{id}                 session state
    POST /sessions/{id}/transcript      append a transcript chunk (open phase)
    GET  /sessions/{id}/facts           full fact set at current revision
    GET  /sessions/{id}/facts/stream    SSE delta stream (since_revision resume)
    POST /sessions/{id}/edits           reject/add a fact
    POST /sessions/{id}/close           end transcription, enter review
    POST /sessions/{id}/finalize        render and store the final note
    GET  /sessions/{id}/note            the stored final note

Transport failures from model backends surface as 503 with retry guidance;
phase violations as 409; unknown ids as 404.
"""

from __future__ import annotations

import asyncio
import json

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from ..backends.base import Backends, TransportError
from ..config import AppConfig, build_backends
from ..facts import UnknownFactError
from ..notes import TemplateError, resolve_template
from ..refine import RefinementConfig
from ..review import EditActor, EditKind
from ..windowing import WindowConfig
from .sessions import (
    PhaseError,
    SessionConfig,
    SessionManager,
    UnknownSessionError,
)


class SessionCreate(BaseModel):
    window: dict | None = None
    refine: dict | None = None
    template: str | None = None


class TranscriptChunk(BaseModel):
    text: str


class EditRequest(BaseModel):
    kind: str
    fact_id: str = ""
    text: str = ""
    actor: str = "human"


class FinalizeRequest(BaseModel):
    template: str | None = None


def create_app(config: AppConfig | None = None,
               backends: Backends | None = None) -> FastAPI:
    config = config or AppConfig.from_env()
    backends = backends or build_backends(config)
    manager = SessionManager(
        backends,
        defaults=SessionConfig(config.window, config.refine, config.template),
        persist_dir=config.persist_dir,
        snapshot_every=config.snapshot_every,
    )

    app = FastAPI(title="factscribe session service", version="0.1.0")
    app.state.manager = manager
    app.state.config = config

    def guard(request: Request) -> None:
        if not config.auth_token:
            return
        expected = f"Bearer {config.auth_token}"
        if request.headers.get("authorization") != expected:
            raise HTTPException(status_code=401, detail="missing or invalid token")

    def session_of(session_id: str):
        try:
            return manager.get(session_id)
        except UnknownSessionError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.exception_handler(PhaseError)
    async def _phase_error(request, exc):
        from fastapi.responses import JSONResponse
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(TransportError)
    async def _transport_error(request, exc):
        from fastapi.responses import JSONResponse
        return JSONResponse(
            status_code=503,
            content={"detail": str(exc), "retryable": True,
                     "guidance": "model backend unavailable; retry the request"},
        )

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionCreate | None = None, request: Request = None):
        guard(request)
        body = body or SessionCreate()
        session_config = SessionConfig(
            window=WindowConfig.from_dict(body.window) if body.window
            else manager.defaults.window,
            refine=RefinementConfig.from_dict(body.refine) if body.refine
            else manager.defaults.refine,
            template=body.template or manager.defaults.template,
        )
        session = manager.create(session_config)
        return {"id": session.id, "phase": session.phase.value,
                "revision": session.revision}

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str, request: Request):
        guard(request)
        return session_of(session_id).state()

    @app.post("/sessions/{session_id}/transcript")
    def append_transcript(session_id: str, body: TranscriptChunk, request: Request):
        guard(request)
        return session_of(session_id).append_transcript(body.text)

    @app.get("/sessions/{session_id}/facts")
    def get_facts(session_id: str, request: Request):
        guard(request)
        return session_of(session_id).facts.to_dict()

    @app.get("/sessions/{session_id}/facts/stream")
    async def stream_facts(session_id: str, request: Request,
                           since_revision: int = 0,
                           until_revision: int | None = None):
        guard(request)
        session = session_of(session_id)

        async def generate():
            last = since_revision
            while True:
                for delta in session.deltas_since(last):
                    last = delta["revision"]
                    yield f"data: {json.dumps(delta, ensure_ascii=False)}\n\n"
                    if until_revision is not None and last >= until_revision:
                        return
                if until_revision is not None and last >= until_revision:
                    return
                if await request.is_disconnected():
                    return
                await asyncio.sleep(0.05)

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.post("/sessions/{session_id}/edits")
    def apply_edit(session_id: str, body: EditRequest, request: Request):
        guard(request)
        try:
            kind = EditKind(body.kind)
            actor = EditActor(body.actor)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        try:
            return session_of(session_id).apply_edit(
                kind, fact_id=body.fact_id, text=body.text, actor=actor
            )
        except UnknownFactError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    @app.post("/sessions/{session_id}/close")
    def close_session(session_id: str, request: Request):
        guard(request)
        return session_of(session_id).close()

    @app.post("/sessions/{session_id}/finalize")
    def finalize_session(session_id: str, body: FinalizeRequest | None = None,
                         request: Request = None):
        guard(request)
        session = session_of(session_id)
        body = body or FinalizeRequest()
        try:
            template = resolve_template(body.template or session.config.template)
        except TemplateError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        note = session.finalize(template)
        return {**note.to_dict(), "revision": session.revision,
                "edit_counts": session.edit_counts()}

    @app.get("/sessions/{session_id}/note")
    def get_note(session_id: str, request: Request):
        guard(request)
        session = session_of(session_id)
        if session.final_note is None:
            raise HTTPException(status_code=409, detail="session not finalized")
        return {**session.final_note.to_dict(), "revision": session.revision,
                "edit_counts": session.edit_counts()}

    return app
