"""HTTP+JSON control plane under /api/v1, consumed by the web UI and CLI."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

from fastapi import Body, Depends, FastAPI, HTTPException, Query, Request
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .service import (
    AuthError,
    AuthorizationError,
    IngestionService,
    NotFoundError,
    ServiceError,
)


class LoginRequest(BaseModel):
    project_id: str
    secret: str


class ParticipantRequest(BaseModel):
    id: str
    demographics: dict[str, str] = {}


class SessionRequest(BaseModel):
    participant_id: str
    device_meta: dict[str, str] = {}
    rate_hz: float = 50.0


class SyncRequest(BaseModel):
    offset_s: float


class SegmentRequest(BaseModel):
    start_s: float
    end_s: float
    activity_name: str


class MarkRequest(BaseModel):
    t_s: float
    name: str


class LabelRequest(BaseModel):
    class_label: str


def _bearer_token(request: Request) -> str:
    auth = request.headers.get("Authorization", "")
    if not auth.startswith("Bearer "):
        raise HTTPException(status_code=401, detail="missing bearer token")
    return auth[len("Bearer ") :]


def create_app(service: IngestionService, ui_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="gaitway", version="0.1.0")

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        from fastapi.responses import JSONResponse

        if isinstance(exc, AuthError):
            status = 401
        elif isinstance(exc, AuthorizationError):
            status = 403
        elif isinstance(exc, NotFoundError):
            status = 404
        else:
            status = 409
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.post("/api/v1/login")
    def login(body: LoginRequest):
        return {"token": service.authenticate(body.project_id, body.secret)}

    @app.get("/api/v1/project")
    def project_info(token: str = Depends(_bearer_token)):
        return service.project_info(token)

    @app.get("/api/v1/participants")
    def list_participants(token: str = Depends(_bearer_token)):
        return [
            {"id": p.id, "demographics": p.demographics, "class_label": p.class_label}
            for p in service.list_participants(token)
        ]

    @app.post("/api/v1/participants")
    def add_participant(body: ParticipantRequest, token: str = Depends(_bearer_token)):
        p = service.add_participant(token, body.id, body.demographics)
        return {"id": p.id}

    @app.post("/api/v1/participants/{participant_id}/label")
    def set_label(participant_id: str, body: LabelRequest, token: str = Depends(_bearer_token)):
        service.set_label(token, participant_id, body.class_label)
        return {"ok": True}

    @app.get("/api/v1/sessions")
    def list_sessions_ep(token: str = Depends(_bearer_token)):
        return service.list_all_sessions(token)

    @app.post("/api/v1/sessions")
    def create_session(body: SessionRequest, token: str = Depends(_bearer_token)):
        sid = service.create_session(token, body.participant_id, body.device_meta, body.rate_hz)
        return {"session_id": sid}

    @app.get("/api/v1/sessions/{session_id}")
    def session_status(session_id: str, token: str = Depends(_bearer_token)):
        return service.session_status(token, session_id)

    @app.post("/api/v1/sessions/{session_id}/record")
    def press_record(session_id: str, token: str = Depends(_bearer_token)):
        service.press_record(token, session_id)
        return {"ok": True}

    @app.post("/api/v1/sessions/{session_id}/stop")
    def stop_session(session_id: str, token: str = Depends(_bearer_token)):
        rec = service.stop_and_finalize(token, session_id)
        return {"session_id": rec.id, "samples": len(rec.track)}

    @app.get("/api/v1/sessions/{session_id}/track")
    def get_track(session_id: str, token: str = Depends(_bearer_token)):
        rec = service.get_session(token, session_id)
        track = rec.track
        return {
            "session_id": rec.id,
            "participant_id": rec.participant_id,
            "nominal_rate_hz": track.nominal_rate_hz,
            "t": track.t.tolist(),
            "ax": track.ax.tolist(),
            "ay": track.ay.tolist(),
            "az": track.az.tolist(),
            "aux": {k: v.tolist() for k, v in track.aux.items()},
            "segments": [list(s) for s in rec.activity_segments],
            "marks": [list(m) for m in rec.gait_event_marks],
            "video_sync_offset_s": rec.video_sync_offset_s,
        }

    @app.post("/api/v1/sessions/{session_id}/sync")
    def set_sync(session_id: str, body: SyncRequest, token: str = Depends(_bearer_token)):
        service.set_video_sync(token, session_id, body.offset_s)
        return {"ok": True}

    @app.post("/api/v1/sessions/{session_id}/segments")
    def add_segment(session_id: str, body: SegmentRequest, token: str = Depends(_bearer_token)):
        service.annotate(token, session_id, body.start_s, body.end_s, body.activity_name)
        return {"ok": True}

    @app.post("/api/v1/sessions/{session_id}/marks")
    def add_mark(session_id: str, body: MarkRequest, token: str = Depends(_bearer_token)):
        service.mark_event(token, session_id, body.t_s, body.name)
        return {"ok": True}

    @app.get("/api/v1/sessions/{session_id}/features")
    def get_features(session_id: str, token: str = Depends(_bearer_token)):
        return service.session_features(token, session_id)

    @app.get("/api/v1/sessions/{session_id}/dashboard")
    def get_dashboard(session_id: str, token: str = Depends(_bearer_token)):
        return service.session_dashboard(token, session_id)

    @app.get("/api/v1/overlay")
    def get_overlay(
        a: str = Query(...),
        b: str = Query(...),
        lag: Optional[float] = Query(None),
        token: str = Depends(_bearer_token),
    ):
        return service.overlay(token, a, b, lag)

    @app.post("/api/v1/ml/train")
    def ml_train(body: dict = Body(...), token: str = Depends(_bearer_token)):
        return {"run_id": service.start_ml_run(token, body)}

    @app.get("/api/v1/ml/runs/{run_id}")
    def ml_run(run_id: str, token: str = Depends(_bearer_token)):
        return service.get_ml_run(token, run_id)

    ui_dir = ui_dir or os.environ.get("GAITWAY_UI_DIR")
    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
