"""Project-scoped server core: auth, session registry, ingestion, annotation.

The registry lock guards the maps; every live session serializes its own
mutations behind a per-session lock, so concurrent client streams never
interleave appends. Finalized sessions are value objects, re-persisted
wholesale after each annotation.
"""

from __future__ import annotations

import json
import math
import queue
import secrets as pysecrets
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .. import signal_tools
from ..features import extract_features
from ..model import (
    GAIT_EVENT_NAMES,
    Participant,
    Project,
    RecordingSession,
    SensorSample,
    SessionState,
    SignalTrack,
    new_session_id,
)
from ..protocol import Effect, Message, MessageKind, SeqTracker, transition
from ..storage import StorageError, list_sessions, load_session, save_session

TOKEN_LIFETIME_S = 24 * 3600


class ServiceError(Exception):
    """Precondition failure on a service operation."""


class AuthError(ServiceError):
    """Unknown project, bad secret, or invalid/expired token."""


class AuthorizationError(ServiceError):
    """Token does not grant access to the resource's project."""


class NotFoundError(ServiceError):
    pass


@dataclass
class LiveSession:
    """Mutable per-session state while a client is attached."""

    id: str
    project_id: str
    participant_id: str
    device_meta: dict
    rate_hz: float = 50.0
    state: SessionState = SessionState.OFF
    lock: threading.RLock = field(default_factory=threading.RLock)
    seq: SeqTracker = field(default_factory=SeqTracker)
    samples: list[SensorSample] = field(default_factory=list)
    outbox: "queue.Queue[Optional[Message]]" = field(default_factory=queue.Queue)
    connected: bool = False
    record_pressed_at: Optional[float] = None
    started_wallclock: Optional[float] = None
    finalized: Optional[RecordingSession] = None


class IngestionService:
    def __init__(self, data_dir: str | Path, token_lifetime_s: float = TOKEN_LIFETIME_S) -> None:
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.token_lifetime_s = token_lifetime_s
        self._lock = threading.RLock()
        self._projects: dict[str, Project] = {}
        self._participants: dict[tuple[str, str], Participant] = {}
        self._sessions: dict[str, LiveSession] = {}
        self._tokens: dict[str, tuple[str, float]] = {}
        self._ml_runs: dict[str, dict] = {}

    # -- projects & participants ------------------------------------------

    def add_project(self, project_id: str, name: str, secret: str, label_set=()) -> Project:
        with self._lock:
            if project_id in self._projects:
                raise ServiceError(f"project {project_id} already exists")
            project = Project.create(project_id, name, secret, label_set)
            self._projects[project_id] = project
            self._load_participants(project_id)
            return project

    def load_projects_file(self, path: str | Path) -> None:
        """Bootstrap credentials: JSON {project_id: {secret, name?, label_set?}}."""
        with open(path) as f:
            data = json.load(f)
        for pid, cfg in data.items():
            self.add_project(
                pid, cfg.get("name", pid), cfg["secret"], cfg.get("label_set", []),
            )

    def _participants_path(self, project_id: str) -> Path:
        return self.data_dir / project_id / "participants.json"

    def _load_participants(self, project_id: str) -> None:
        path = self._participants_path(project_id)
        if not path.is_file():
            return
        with open(path) as f:
            for entry in json.load(f):
                p = Participant(entry["id"], entry.get("demographics", {}), entry.get("class_label"))
                self._participants[(project_id, p.id)] = p

    def _save_participants(self, project_id: str) -> None:
        entries = [
            {"id": p.id, "demographics": p.demographics, "class_label": p.class_label}
            for (pid, _), p in sorted(self._participants.items())
            if pid == project_id
        ]
        path = self._participants_path(project_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(entries, f, indent=2)

    def add_participant(
        self, token: str, participant_id: str, demographics: Optional[dict] = None
    ) -> Participant:
        project_id = self._authorize(token)
        with self._lock:
            key = (project_id, participant_id)
            if key in self._participants:
                raise ServiceError(f"participant {participant_id} already exists")
            p = Participant(participant_id, dict(demographics or {}))
            self._participants[key] = p
            self._save_participants(project_id)
            return p

    def list_participants(self, token: str) -> list[Participant]:
        project_id = self._authorize(token)
        with self._lock:
            return [p for (pid, _), p in sorted(self._participants.items()) if pid == project_id]

    def set_label(self, token: str, participant_id: str, class_label: str) -> None:
        project_id = self._authorize(token)
        with self._lock:
            project = self._projects[project_id]
            participant = self._participants.get((project_id, participant_id))
            if participant is None:
                raise NotFoundError(f"unknown participant {participant_id}")
            if class_label not in project.label_set:
                raise ServiceError(
                    f"label {class_label!r} not in project label set {project.label_set}"
                )
            participant.class_label = class_label
            self._save_participants(project_id)

    # -- auth ---------------------------------------------------------------

    def authenticate(self, project_id: str, secret: str) -> str:
        with self._lock:
            project = self._projects.get(project_id)
        if project is None:
            raise AuthError(f"unknown project {project_id}")
        if not project.verify_secret(secret):
            raise AuthError("bad secret")
        token = pysecrets.token_urlsafe(32)
        with self._lock:
            self._tokens[token] = (project_id, time.time() + self.token_lifetime_s)
        return token

    def _authorize(self, token: str, project_id: Optional[str] = None) -> str:
        with self._lock:
            entry = self._tokens.get(token)
        if entry is None:
            raise AuthError("invalid token")
        bound_project, expires = entry
        if time.time() > expires:
            raise AuthError("expired token")
        if project_id is not None and project_id != bound_project:
            raise AuthorizationError(
                f"token for project {bound_project} cannot access project {project_id}"
            )
        return bound_project

    # -- session lifecycle ----------------------------------------------------

    def _require_participant(self, project_id: str, participant_id: str) -> Participant:
        p = self._participants.get((project_id, participant_id))
        if p is None:
            raise NotFoundError(f"unknown participant {participant_id}")
        return p

    def _live_session_for(self, project_id: str, participant_id: str) -> Optional[LiveSession]:
        for s in self._sessions.values():
            if (
                s.project_id == project_id
                and s.participant_id == participant_id
                and s.state in (SessionState.READY, SessionState.STREAMING)
            ):
                return s
        return None

    def create_session(
        self,
        token: str,
        participant_id: str,
        device_meta: Optional[dict] = None,
        rate_hz: float = 50.0,
    ) -> str:
        project_id = self._authorize(token)
        return self._create_session(project_id, participant_id, device_meta, rate_hz).id

    def _create_session(
        self, project_id: str, participant_id: str, device_meta: Optional[dict], rate_hz: float
    ) -> LiveSession:
        with self._lock:
            self._require_participant(project_id, participant_id)
            live = self._live_session_for(project_id, participant_id)
            if live is not None:
                raise ServiceError(
                    f"participant {participant_id} already has live session {live.id}"
                )
            session = LiveSession(
                id=new_session_id(),
                project_id=project_id,
                participant_id=participant_id,
                device_meta=dict(device_meta or {}),
                rate_hz=rate_hz,
            )
            self._sessions[session.id] = session
            return session

    def get_live(self, session_id: str, project_id: Optional[str] = None) -> LiveSession:
        with self._lock:
            s = self._sessions.get(session_id)
        if s is None or (project_id is not None and s.project_id != project_id):
            raise NotFoundError(f"unknown session {session_id}")
        return s

    def attach_client(self, hello: Message) -> tuple[LiveSession, Message]:
        """Handle a Hello from the data plane: arm an existing Off session or
        create one implicitly for the named participant."""
        project_id = hello.project_id or "default"
        with self._lock:
            if project_id not in self._projects:
                raise NotFoundError(f"unknown project {project_id}")
        rate = 50.0
        try:
            rate = float(hello.device_meta.get("rate_hz", 50.0))
        except (TypeError, ValueError):
            pass
        if hello.session_id:
            session = self.get_live(hello.session_id, project_id)
        else:
            if not hello.participant_id:
                raise ServiceError("Hello must carry participant_id or session_id")
            session = self._create_session(
                project_id, hello.participant_id, hello.device_meta, rate
            )
        with session.lock:
            new_state, effects = transition(session.state, hello, "client")
            if Effect.REJECT in effects:
                raise ServiceError(f"cannot arm session {session.id} in state {session.state.value}")
            session.state = new_state
            session.connected = True
            if hello.device_meta:
                session.device_meta.update(hello.device_meta)
                session.rate_hz = rate
        return session, Message(kind=MessageKind.ARMED, session_id=session.id)

    def client_disconnected(self, session: LiveSession) -> None:
        """Ready drops back to Off; Streaming keeps its acked prefix."""
        with session.lock:
            session.connected = False
            if session.state == SessionState.READY:
                session.state = SessionState.OFF

    def press_record(self, token: str, session_id: str) -> None:
        project_id = self._authorize(token)
        session = self.get_live(session_id, project_id)
        with session.lock:
            if session.state == SessionState.STREAMING:
                return  # idempotent second press: no extra Start
            if session.state != SessionState.READY:
                raise ServiceError("client not armed")
            start = Message(kind=MessageKind.START, session_id=session.id)
            new_state, effects = transition(session.state, start, "server")
            assert new_state == SessionState.STREAMING and Effect.REJECT not in effects
            session.state = new_state
            session.record_pressed_at = time.time()
            session.started_wallclock = time.time()
            session.outbox.put(start)
            self._open_batch_log(session)

    # -- ingestion -------------------------------------------------------------

    def _batch_log_path(self, session: LiveSession) -> Path:
        return self.data_dir / session.project_id / session.id / "batches.log"

    def _open_batch_log(self, session: LiveSession) -> None:
        path = self._batch_log_path(session)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.touch()

    def ingest(self, session: LiveSession, batch: Message) -> Message:
        """Append an in-order batch; duplicates are dropped, gaps rejected
        with the expected seq so the client can retransmit."""
        if batch.kind != MessageKind.SAMPLE_BATCH or batch.seq is None or not batch.samples:
            raise ServiceError("not a sample batch")
        with session.lock:
            _, effects = transition(session.state, batch, "client")
            if Effect.REJECT in effects or Effect.ACCEPT_SAMPLES not in effects:
                return Message(
                    kind=MessageKind.ERROR,
                    session_id=session.id,
                    reason=f"batch in state {session.state.value}",
                )
            verdict = session.seq.check(batch.seq)
            if verdict == "duplicate":
                return Message(
                    kind=MessageKind.ACK, session_id=session.id, seq=session.seq.highest_contiguous
                )
            if verdict == "gap":
                return Message(
                    kind=MessageKind.ERROR,
                    session_id=session.id,
                    reason="seq gap",
                    expected_seq=session.seq.expected,
                )
            ts = [s.t for s in batch.samples]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                return Message(
                    kind=MessageKind.ERROR, session_id=session.id,
                    reason="out-of-order timestamps within batch",
                )
            if session.samples and ts[0] <= session.samples[-1].t:
                return Message(
                    kind=MessageKind.ERROR, session_id=session.id,
                    reason="batch timestamps overlap already-accepted samples",
                )
            session.samples.extend(batch.samples)
            session.seq.record(batch.seq)
            self._append_batch_log(session, batch)
            return Message(kind=MessageKind.ACK, session_id=session.id, seq=batch.seq)

    def _append_batch_log(self, session: LiveSession, batch: Message) -> None:
        with open(self._batch_log_path(session), "a") as f:
            f.write(
                json.dumps(
                    {"seq": batch.seq, "samples": [[s.t, s.ax, s.ay, s.az] for s in batch.samples]}
                )
                + "\n"
            )

    # -- finalize & annotation --------------------------------------------------

    def stop_and_finalize(
        self, token: Optional[str], session_id: str, origin: str = "server"
    ) -> RecordingSession:
        project_id = self._authorize(token, None) if token is not None else None
        session = self.get_live(session_id, project_id)
        with session.lock:
            if session.state == SessionState.FINALIZED:
                if session.finalized is None:
                    raise ServiceError("session finalized without samples")
                return session.finalized  # double stop is idempotent
            stop = Message(kind=MessageKind.STOP, session_id=session.id)
            new_state, effects = transition(session.state, stop, origin)
            if Effect.FINALIZE not in effects:
                raise ServiceError(f"cannot stop session in state {session.state.value}")
            if not session.samples:
                raise ServiceError("no samples ingested; nothing to persist")
            session.state = new_state
            if origin == "server":
                session.outbox.put(stop)
            session.outbox.put(None)  # writer shutdown sentinel
            track = SignalTrack.from_samples(session.samples, session.rate_hz)
            rec = RecordingSession(
                id=session.id,
                project_id=session.project_id,
                participant_id=session.participant_id,
                state=SessionState.FINALIZED,
                track=track,
                device_meta={k: str(v) for k, v in session.device_meta.items()},
            )
            save_session(rec, self.data_dir)
            self._batch_log_path(session).unlink(missing_ok=True)
            session.finalized = rec
            return rec

    def _finalized(self, project_id: str, session_id: str) -> RecordingSession:
        with self._lock:
            live = self._sessions.get(session_id)
        if live is not None and live.project_id == project_id and live.finalized is not None:
            return live.finalized
        try:
            rec = load_session(self.data_dir, project_id, session_id)
        except StorageError as e:
            raise NotFoundError(f"no finalized session {session_id}: {e}") from e
        return rec

    def _store_finalized(self, rec: RecordingSession) -> None:
        save_session(rec, self.data_dir)
        with self._lock:
            live = self._sessions.get(rec.id)
            if live is not None:
                live.finalized = rec

    def get_session(self, token: str, session_id: str) -> RecordingSession:
        project_id = self._authorize(token)
        return self._finalized(project_id, session_id)

    def session_status(self, token: str, session_id: str) -> dict:
        project_id = self._authorize(token)
        with self._lock:
            live = self._sessions.get(session_id)
        if live is not None and live.project_id == project_id:
            with live.lock:
                return {
                    "session_id": live.id,
                    "participant_id": live.participant_id,
                    "state": live.state.value,
                    "connected": live.connected,
                    "samples": len(live.samples),
                    "acked_batches": live.seq.highest_contiguous,
                }
        rec = self._finalized(project_id, session_id)
        return {
            "session_id": rec.id,
            "participant_id": rec.participant_id,
            "state": rec.state.value,
            "connected": False,
            "samples": len(rec.track) if rec.track else 0,
            "acked_batches": None,
        }

    def list_all_sessions(self, token: str) -> list[dict]:
        project_id = self._authorize(token)
        out = {}
        for sid in list_sessions(self.data_dir, project_id):
            out[sid] = None
        with self._lock:
            live_ids = [
                s.id for s in self._sessions.values() if s.project_id == project_id
            ]
        for sid in live_ids:
            out[sid] = None
        return [self.session_status(token, sid) for sid in sorted(out)]

    def set_video_sync(self, token: str, session_id: str, offset_s: float) -> None:
        project_id = self._authorize(token)
        if not isinstance(offset_s, (int, float)) or not math.isfinite(offset_s):
            raise ServiceError(f"offset must be finite, got {offset_s!r}")
        rec = self._finalized(project_id, session_id)
        rec.video_sync_offset_s = float(offset_s)
        self._store_finalized(rec)

    def annotate(
        self, token: str, session_id: str, start_s: float, end_s: float, activity_name: str
    ) -> None:
        project_id = self._authorize(token)
        rec = self._finalized(project_id, session_id)
        t0, t1 = float(rec.track.t[0]), float(rec.track.t[-1])
        if not (start_s < end_s):
            raise ServiceError(f"segment start {start_s} must be < end {end_s}")
        if start_s < t0 - 1e-9 or end_s > t1 + 1e-9:
            raise ServiceError(f"segment [{start_s}, {end_s}] outside track range [{t0}, {t1}]")
        rec.activity_segments.append((float(start_s), float(end_s), str(activity_name)))
        self._store_finalized(rec)

    def mark_event(self, token: str, session_id: str, t_s: float, name: str) -> None:
        project_id = self._authorize(token)
        if name not in GAIT_EVENT_NAMES:
            raise ServiceError(f"unknown gait event {name!r}; expected one of {GAIT_EVENT_NAMES}")
        rec = self._finalized(project_id, session_id)
        t0, t1 = float(rec.track.t[0]), float(rec.track.t[-1])
        if not (t0 - 1e-9 <= t_s <= t1 + 1e-9):
            raise ServiceError(f"mark at {t_s} outside track range [{t0}, {t1}]")
        rec.gait_event_marks.append((float(t_s), str(name)))
        self._store_finalized(rec)

    # -- analytics views -----------------------------------------------------

    def session_features(self, token: str, session_id: str) -> dict:
        project_id = self._authorize(token)
        rec = self._finalized(project_id, session_id)
        return extract_features(rec).to_dict()

    def session_dashboard(self, token: str, session_id: str) -> dict:
        project_id = self._authorize(token)
        rec = self._finalized(project_id, session_id)
        return signal_tools.build_dashboard(rec).to_dict()

    def overlay(self, token: str, a: str, b: str, lag_s: Optional[float] = None) -> dict:
        project_id = self._authorize(token)
        ra = self._finalized(project_id, a)
        rb = self._finalized(project_id, b)
        return signal_tools.overlay(ra, rb, lag_s).to_dict()

    def project_info(self, token: str) -> dict:
        project_id = self._authorize(token)
        with self._lock:
            project = self._projects[project_id]
        return {"project_id": project.id, "name": project.name, "label_set": project.label_set}

    # -- ml runs ----------------------------------------------------------------

    def start_ml_run(self, token: str, request: dict) -> str:
        from ..ml import ClassifierSpec, Representation, ReducerSpec, build_dataset, loso_evaluate

        project_id = self._authorize(token)
        run_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._ml_runs[run_id] = {"status": "running", "project_id": project_id}

        def work() -> None:
            try:
                spec = ClassifierSpec.from_dict(request["classifier"])
                representation = Representation(request.get("representation", "ClinicalFeatures"))
                reducer = None
                if request.get("reducer"):
                    reducer = ReducerSpec(
                        request["reducer"]["kind"], int(request["reducer"]["n_components"])
                    )
                session_ids = request.get("session_ids")
                if not session_ids:
                    session_ids = list_sessions(self.data_dir, project_id)
                sessions, labels = [], {}
                with self._lock:
                    participants = {
                        pid: p for (proj, pid), p in self._participants.items()
                        if proj == project_id
                    }
                for sid in session_ids:
                    rec = self._finalized(project_id, sid)
                    p = participants.get(rec.participant_id)
                    if p is None or p.class_label is None:
                        raise ServiceError(f"participant {rec.participant_id} is unlabeled")
                    labels[rec.participant_id] = p.class_label
                    sessions.append(rec)
                dataset = build_dataset(
                    sessions,
                    labels,
                    representation,
                    window_s=request.get("window_s"),
                    stride_s=request.get("stride_s"),
                )
                report = loso_evaluate(spec, dataset, reducer)
                with self._lock:
                    self._ml_runs[run_id].update(status="done", report=report.to_dict())
            except Exception as e:  # surfaced through the API, not lost in the thread
                with self._lock:
                    self._ml_runs[run_id].update(status="error", error=str(e))

        threading.Thread(target=work, daemon=True).start()
        return run_id

    def get_ml_run(self, token: str, run_id: str) -> dict:
        project_id = self._authorize(token)
        with self._lock:
            run = self._ml_runs.get(run_id)
            if run is None or run.get("project_id") != project_id:
                raise NotFoundError(f"unknown run {run_id}")
            return {k: v for k, v in run.items() if k != "project_id"}
