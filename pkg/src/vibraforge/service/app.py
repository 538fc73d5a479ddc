"""HTTP facade over the pattern model and simulator.

The service holds documents in memory, validates every write through the
core model, and answers playback queries from simulation traces.  All
mutation of per-session playback state is serialized under one lock.
"""

import json
import time

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse

from .. import pattern, simulator
from ..errors import VibraforgeError
from . import playback, schemas
from .store import DocumentStore, RevisionConflictError, SessionManager


def _duration_ms(doc) -> float:
    return max((a.t_end_ms for a in doc.assignments), default=0.0)


def _to_core(model: schemas.DocumentModel):
    """Build a validated core document from a request payload."""
    try:
        return pattern.document_from_json(model.model_dump(exclude_none=True))
    except VibraforgeError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None


def _from_core(doc) -> schemas.DocumentModel:
    return schemas.DocumentModel.model_validate(
        json.loads(pattern.document_to_json(doc)))


def _resource(row) -> schemas.PatternResource:
    return schemas.PatternResource(
        id=row.id,
        revision=row.revision,
        unit_count=sum(len(c) for c in row.document.chains),
        document=_from_core(row.document),
    )


def _command_row(tc) -> schemas.CommandModel:
    cmd = tc.command
    return schemas.CommandModel(
        t_ms=tc.t_ms,
        chain=tc.chain_id,
        address=cmd.address,
        action=cmd.action.value,
        intensity=cmd.intensity,
        frequency_index=cmd.frequency_index,
        waveform=None if cmd.waveform is None else cmd.waveform.value,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="vibraforge")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    patterns = DocumentStore()
    sessions = SessionManager()

    def stored_or_404(pattern_id: str):
        row = patterns.get(pattern_id)
        if row is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown pattern id {pattern_id!r}")
        return row

    @app.post("/patterns", response_model=schemas.PatternResource,
              status_code=201)
    def create_pattern(req: schemas.PatternCreateRequest):
        return _resource(patterns.create(_to_core(req.document)))

    @app.get("/patterns", response_model=schemas.PatternList)
    def list_patterns():
        return schemas.PatternList(
            patterns=[_resource(row) for row in patterns.list()])

    @app.get("/patterns/{pattern_id}", response_model=schemas.PatternResource)
    def read_pattern(pattern_id: str):
        return _resource(stored_or_404(pattern_id))

    @app.put("/patterns/{pattern_id}", response_model=schemas.PatternResource)
    def update_pattern(pattern_id: str, req: schemas.PatternUpdateRequest):
        stored_or_404(pattern_id)
        doc = _to_core(req.document)
        try:
            return _resource(
                patterns.update(pattern_id, doc, req.expected_revision))
        except RevisionConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"unknown pattern id {pattern_id!r}")

    @app.delete("/patterns/{pattern_id}", response_model=schemas.DeleteResponse)
    def delete_pattern(pattern_id: str):
        stored_or_404(pattern_id)
        sessions.drop(pattern_id)
        return schemas.DeleteResponse(deleted=patterns.delete(pattern_id))

    @app.post("/patterns/{pattern_id}/compile",
              response_model=schemas.CompileResponse)
    def compile_pattern(pattern_id: str):
        row = stored_or_404(pattern_id)
        try:
            commands = pattern.compile(row.document)
        except VibraforgeError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return schemas.CompileResponse(
            count=len(commands),
            commands=[_command_row(tc) for tc in commands])

    @app.post("/sessions/{pattern_id}/play", response_model=schemas.PlayResponse)
    def play(pattern_id: str, req: schemas.PlayRequest):
        row = stored_or_404(pattern_id)
        duration = _duration_ms(row.document)
        if req.from_ms < 0 or req.from_ms > duration:
            raise HTTPException(
                status_code=422,
                detail=f"from_ms {req.from_ms} outside [0, {duration}]")
        with sessions.lock:
            session = sessions.session(pattern_id)
            if session.status == "PLAYING":
                raise HTTPException(status_code=409,
                                    detail="session is already playing")
            try:
                frames = playback.build_frames(row.document, req.from_ms)
            except VibraforgeError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from None
            session.status = "PLAYING"
            session.from_ms = req.from_ms
            session.cursor_ms = req.from_ms
            session.frames = frames
            session.served = 0
        return schemas.PlayResponse(
            session_id=pattern_id, status="PLAYING",
            frame_count=len(frames), end_ms=frames[-1]["t_ms"])

    @app.post("/sessions/{pattern_id}/stop", response_model=schemas.SessionStatus)
    def stop(pattern_id: str):
        row = stored_or_404(pattern_id)
        with sessions.lock:
            session = sessions.session(pattern_id)
            if session.status == "PLAYING":
                # keep served frames as history, replace the future with the
                # halt-and-quiesce timeline
                session.frames = playback.stop_frames(
                    row.document, session.from_ms, session.cursor_ms)
                session.status = "STOPPED"
            return schemas.SessionStatus(
                session_id=pattern_id, status=session.status,
                cursor_ms=session.cursor_ms)

    @app.get("/sessions/{pattern_id}", response_model=schemas.SessionStatus)
    def session_status(pattern_id: str):
        stored_or_404(pattern_id)
        with sessions.lock:
            session = sessions.session(pattern_id)
            return schemas.SessionStatus(
                session_id=pattern_id, status=session.status,
                cursor_ms=session.cursor_ms)

    @app.post("/sessions/{pattern_id}/scrub", response_model=schemas.ScrubResponse)
    def scrub(pattern_id: str, req: schemas.ScrubRequest):
        row = stored_or_404(pattern_id)
        duration = _duration_ms(row.document)
        if req.t_ms < 0 or req.t_ms > duration:
            raise HTTPException(
                status_code=422,
                detail=f"t_ms {req.t_ms} outside [0, {duration}]")
        units = sorted(pattern.active_units_at(row.document, req.t_ms))
        return schemas.ScrubResponse(
            t_ms=req.t_ms,
            units=[schemas.UnitRefModel(chain=c, addr=a) for c, a in units])

    @app.get("/sessions/{pattern_id}/frames")
    def frames(pattern_id: str, pace: str = "fast"):
        stored_or_404(pattern_id)
        if pace not in ("fast", "realtime"):
            raise HTTPException(status_code=422,
                                detail=f"unknown pace {pace!r}")

        def generate():
            while True:
                with sessions.lock:
                    session = sessions.session(pattern_id)
                    if session.served >= len(session.frames):
                        session.status = "STOPPED"
                        return
                    msg = session.frames[session.served]
                    session.served += 1
                    session.cursor_ms = msg["t_ms"]
                yield json.dumps(msg, sort_keys=True) + "\n"
                if pace == "realtime":
                    time.sleep(1.0 / playback.FRAME_RATE_HZ)

        return StreamingResponse(generate(), media_type="application/x-ndjson")

    return app
