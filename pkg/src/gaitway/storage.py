"""CSV + JSON persistence for finalized sessions.

Layout: <root>/<project>/<session-id>/track.csv and meta.json.
track.csv rows carry fixed 9-decimal values so golden files are stable
across platforms and load(save(s)) is exact.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Union

import numpy as np

from .model import ModelError, RecordingSession, SessionState, SignalTrack


class StorageError(Exception):
    """Missing, malformed, or unwritable session data."""


def session_dir(root: Union[str, Path], project_id: str, session_id: str) -> Path:
    return Path(root) / project_id / session_id


def save_session(session: RecordingSession, root: Union[str, Path]) -> list[Path]:
    """Write track.csv and meta.json; returns the paths written."""
    if session.state != SessionState.FINALIZED:
        raise StorageError(f"session {session.id} is {session.state.value}, not Finalized")
    session.validate()
    out = session_dir(root, session.project_id, session.id)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"cannot create {out}: {e}") from e

    track = session.track
    csv_path = out / "track.csv"
    aux_names = track.aux_names
    header = "t,ax,ay,az" + "".join("," + n for n in aux_names)
    try:
        with open(csv_path, "w", newline="") as f:
            f.write(header + "\n")
            cols = [track.t, track.ax, track.ay, track.az] + [track.aux[n] for n in aux_names]
            for row in zip(*cols):
                f.write(",".join(f"{v:.9f}" for v in row) + "\n")
    except OSError as e:
        raise StorageError(f"cannot write {csv_path}: {e}") from e

    meta = {
        "session_id": session.id,
        "project_id": session.project_id,
        "participant_id": session.participant_id,
        "state": session.state.value,
        "nominal_rate_hz": track.nominal_rate_hz,
        "aux_channels": list(aux_names),
        "segments": [[s, e, name] for s, e, name in session.activity_segments],
        "marks": [[t, name] for t, name in session.gait_event_marks],
        "video_sync_offset_s": session.video_sync_offset_s,
        "device_meta": session.device_meta,
    }
    meta_path = out / "meta.json"
    try:
        with open(meta_path, "w") as f:
            json.dump(meta, f, indent=2, allow_nan=False)
            f.write("\n")
    except OSError as e:
        raise StorageError(f"cannot write {meta_path}: {e}") from e
    return [csv_path, meta_path]


def load_session(root: Union[str, Path], project_id: str, session_id: str) -> RecordingSession:
    """Inverse of save_session."""
    d = session_dir(root, project_id, session_id)
    csv_path, meta_path = d / "track.csv", d / "meta.json"
    for p in (csv_path, meta_path):
        if not p.is_file():
            raise StorageError(f"not found: {p}")
    try:
        with open(meta_path) as f:
            meta = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise StorageError(f"malformed meta.json: {e}") from e

    with open(csv_path) as f:
        header = f.readline().strip()
        columns = header.split(",")
        if columns[:4] != ["t", "ax", "ay", "az"]:
            raise StorageError(f"unexpected track.csv header: {header!r}")
        aux_names = columns[4:]
        data: list[list[float]] = []
        prev_t = -np.inf
        for i, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(columns):
                raise StorageError(f"row {i}: expected {len(columns)} fields, got {len(parts)}")
            try:
                row = [float(v) for v in parts]
            except ValueError as e:
                raise StorageError(f"row {i}: {e}") from e
            if row[0] <= prev_t:
                raise StorageError(f"row {i}: timestamp {row[0]} not after {prev_t}")
            prev_t = row[0]
            data.append(row)
    if not data:
        raise StorageError(f"{csv_path} has no samples")

    arr = np.array(data, dtype=float)
    try:
        track = SignalTrack(
            arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3],
            nominal_rate_hz=float(meta["nominal_rate_hz"]),
            aux={n: arr[:, 4 + j] for j, n in enumerate(aux_names)},
        )
        session = RecordingSession(
            id=meta["session_id"],
            project_id=meta.get("project_id", project_id),
            participant_id=meta["participant_id"],
            state=SessionState(meta["state"]),
            track=track,
            activity_segments=[(float(s), float(e), str(n)) for s, e, n in meta["segments"]],
            gait_event_marks=[(float(t), str(n)) for t, n in meta["marks"]],
            video_sync_offset_s=(
                None if meta["video_sync_offset_s"] is None else float(meta["video_sync_offset_s"])
            ),
            device_meta=dict(meta.get("device_meta", {})),
        )
        session.validate()
    except (KeyError, ModelError, TypeError) as e:
        raise StorageError(f"invalid session data in {d}: {e}") from e
    return session


def list_sessions(root: Union[str, Path], project_id: str) -> list[str]:
    """Session ids persisted under a project, sorted."""
    pdir = Path(root) / project_id
    if not pdir.is_dir():
        return []
    return sorted(
        entry for entry in os.listdir(pdir) if (pdir / entry / "meta.json").is_file()
    )
