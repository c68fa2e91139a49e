"""Operator entry point: serve, simulate, extract, dashboard, overlay,
train, evaluate, export, and `remote` verbs that drive a running server's
HTTP API one-to-one.

Exit codes: 0 success, 1 usage error, 2 runtime error.
Configuration precedence: flags > GAITWAY_* env vars > gaitway.toml.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        raise UsageError(message)


def _load_config() -> dict:
    path = Path(os.environ.get("GAITWAY_CONFIG", "gaitway.toml"))
    if not path.is_file():
        return {}
    try:
        import tomllib
    except ModuleNotFoundError:
        try:
            import tomli as tomllib
        except ModuleNotFoundError:  # pragma: no cover
            return {}
    with open(path, "rb") as f:
        return tomllib.load(f)


def _setting(args, name: str, default):
    """flags > env > config file > default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    env = os.environ.get(f"GAITWAY_{name.upper()}")
    if env is not None:
        return env
    cfg = _load_config()
    if name in cfg:
        return cfg[name]
    return default


def build_parser() -> _Parser:
    parser = _Parser(prog="gaitway", description=__doc__)
    parser.add_argument("--data-dir", dest="data_dir", help="session storage root")
    parser.add_argument("--seed", type=int, default=None, help="global RNG seed")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("serve", help="run the streaming + HTTP server")
    p.add_argument("--listen", help="data-plane host:port (default 127.0.0.1:7700)")
    p.add_argument("--http", default="127.0.0.1:7780", help="HTTP host:port")
    p.add_argument("--secret-file", help="project credentials JSON (or GAITWAY_SECRET_FILE)")
    p.add_argument("--ui-dir", help="static web UI directory (or GAITWAY_UI_DIR)")

    p = sub.add_parser("simulate", help="synthesize gait data, optionally streaming it")
    p.add_argument("--preset", default="typical_child", choices=["typical_child", "impaired_gait"])
    p.add_argument("--server", help="host:port of a running data plane")
    p.add_argument("--project", default="default")
    p.add_argument("--participant", default="sim-p1")
    p.add_argument("--duration", type=float, default=360.0)
    p.add_argument("--rate", type=float, default=50.0)
    p.add_argument("--speedup", type=float, default=1.0)
    p.add_argument("--emit-csv", help="write the track as CSV instead of streaming")

    for name, extra in [
        ("extract", "clinical features"),
        ("dashboard", "dashboard bundle"),
        ("export", "full session bundle"),
    ]:
        p = sub.add_parser(name, help=f"compute {extra} for a stored session")
        p.add_argument("--session", required=True)
        p.add_argument("--project", default="default")
        p.add_argument("--out", help="output path" + (" (directory)" if name == "export" else ""))
        if name == "extract":
            p.add_argument("--segment", help="restrict to a named activity segment")

    p = sub.add_parser("overlay", help="align two sessions' forward acceleration")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--project", default="default")
    p.add_argument("--lag", type=float, default=None)
    p.add_argument("--out")

    for name in ("train", "evaluate"):
        p = sub.add_parser(
            name,
            help="fit a classifier on stored sessions" if name == "train"
            else "leave-one-subject-out evaluation",
        )
        p.add_argument("--spec", required=True, help="classifier spec JSON file")
        p.add_argument("--project", default="default")
        p.add_argument("--representation", default="features", choices=["features", "raw", "reduced"])
        p.add_argument("--reducer", choices=["pca", "lda"])
        p.add_argument("--components", type=int, default=1)
        p.add_argument("--window", type=float, default=5.0, help="raw window seconds")
        p.add_argument("--stride", type=float, default=5.0, help="raw stride seconds")
        p.add_argument("--out", help="model/report output path")
        if name == "evaluate":
            p.add_argument("--parallel", type=int, default=1, help="fold workers")

    p = sub.add_parser("remote", help="call a running server's HTTP API")
    p.add_argument("verb", choices=sorted(REMOTE_VERBS))
    p.add_argument("--url", default="http://127.0.0.1:7780", help="server base URL")
    p.add_argument("--token", help="bearer token (or GAITWAY_TOKEN)")
    p.add_argument("--project")
    p.add_argument("--secret")
    p.add_argument("--participant")
    p.add_argument("--session")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--lag", type=float)
    p.add_argument("--label")
    p.add_argument("--offset", type=float)
    p.add_argument("--start", type=float)
    p.add_argument("--end", type=float)
    p.add_argument("--activity")
    p.add_argument("--t", type=float)
    p.add_argument("--name")
    p.add_argument("--demographics", help="JSON object")
    p.add_argument("--body", help="JSON request body (train)")
    p.add_argument("--run-id")
    return parser


# every HTTP endpoint is reachable through one of these verbs
REMOTE_VERBS: dict[str, tuple[str, str]] = {
    "login": ("POST", "/api/v1/login"),
    "project": ("GET", "/api/v1/project"),
    "participants": ("GET", "/api/v1/participants"),
    "participant-add": ("POST", "/api/v1/participants"),
    "label": ("POST", "/api/v1/participants/{participant_id}/label"),
    "sessions": ("GET", "/api/v1/sessions"),
    "session-create": ("POST", "/api/v1/sessions"),
    "session-status": ("GET", "/api/v1/sessions/{session_id}"),
    "record": ("POST", "/api/v1/sessions/{session_id}/record"),
    "stop": ("POST", "/api/v1/sessions/{session_id}/stop"),
    "track": ("GET", "/api/v1/sessions/{session_id}/track"),
    "sync": ("POST", "/api/v1/sessions/{session_id}/sync"),
    "segment": ("POST", "/api/v1/sessions/{session_id}/segments"),
    "mark": ("POST", "/api/v1/sessions/{session_id}/marks"),
    "features": ("GET", "/api/v1/sessions/{session_id}/features"),
    "dashboard": ("GET", "/api/v1/sessions/{session_id}/dashboard"),
    "overlay": ("GET", "/api/v1/overlay"),
    "train": ("POST", "/api/v1/ml/train"),
    "run": ("GET", "/api/v1/ml/runs/{run_id}"),
}


def _emit(args, payload) -> None:
    if args.json:
        print(json.dumps(payload))
    else:
        print(json.dumps(payload, indent=2))


def _data_dir(args) -> str:
    return str(_setting(args, "data_dir", "./gaitway-data"))


def _load_stored_session(args, session_id: str, project: str):
    from .storage import load_session

    return load_session(_data_dir(args), project, session_id)


def _cmd_serve(args) -> int:
    import uvicorn

    from .server.http_api import create_app
    from .server.service import IngestionService
    from .server.stream import start_stream_server

    service = IngestionService(_data_dir(args))
    secret_file = args.secret_file or os.environ.get("GAITWAY_SECRET_FILE")
    if secret_file:
        service.load_projects_file(secret_file)
    else:
        service.add_project("default", "Default project", "default-secret", ["impaired", "typical"])
        print("warning: no secret file; created project 'default' with secret 'default-secret'",
              file=sys.stderr)

    listen = _setting(args, "listen", "127.0.0.1:7700")
    host, _, port = str(listen).partition(":")
    stream = start_stream_server(service, host, int(port or 7700))
    print(f"data plane listening on {host}:{stream.port}", file=sys.stderr)

    http_host, _, http_port = args.http.partition(":")
    app = create_app(service, ui_dir=args.ui_dir)
    uvicorn.run(app, host=http_host, port=int(http_port or 7780), log_level="warning")
    stream.shutdown()
    return 0


def _cmd_simulate(args) -> int:
    from .simulator import preset, run_client, synthesize

    seed = int(_setting(args, "seed", 0))
    profile = preset(args.preset, seed)
    if args.emit_csv:
        track, truth = synthesize(profile, args.duration, args.rate)
        path = Path(args.emit_csv)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            f.write("t,ax,ay,az\n")
            for row in zip(track.t, track.ax, track.ay, track.az):
                f.write(",".join(f"{v:.9f}" for v in row) + "\n")
        _emit(args, {
            "csv": str(path),
            "samples": len(track),
            "ground_truth_steps": truth.num_steps,
            "ground_truth_distance_m": truth.total_distance_m,
        })
        return 0
    if not args.server:
        raise UsageError("simulate needs --server or --emit-csv")
    sid = run_client(
        profile, args.server, args.participant, args.duration,
        speedup=args.speedup, project_id=args.project, rate_hz=args.rate,
    )
    _emit(args, {"session_id": sid})
    return 0


def _cmd_extract(args) -> int:
    from .features import extract_features

    session = _load_stored_session(args, args.session, args.project)
    segment = None
    if getattr(args, "segment", None):
        seg = session.find_segment(args.segment)
        if seg is None:
            raise UsageError(f"session has no segment named {args.segment!r}")
        segment = (seg[0], seg[1])
    fv = extract_features(session, segment)
    payload = fv.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2))
    _emit(args, payload)
    return 0


def _cmd_dashboard(args) -> int:
    from .signal_tools import build_dashboard

    session = _load_stored_session(args, args.session, args.project)
    payload = build_dashboard(session).to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2))
    _emit(args, payload)
    return 0


def _cmd_overlay(args) -> int:
    from .signal_tools import overlay

    a = _load_stored_session(args, args.a, args.project)
    b = _load_stored_session(args, args.b, args.project)
    payload = overlay(a, b, args.lag).to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2))
        _emit(args, {"out": args.out, "lag_s": payload["lag_s"], "points": len(payload["t"])})
    else:
        _emit(args, payload)
    return 0


def _cmd_export(args) -> int:
    from .features import extract_features
    from .signal_tools import build_dashboard
    from .storage import save_session

    session = _load_stored_session(args, args.session, args.project)
    out = Path(args.out or f"./export-{args.session}")
    out.mkdir(parents=True, exist_ok=True)
    written = [str(p) for p in save_session(session, out)]
    features = out / session.project_id / session.id / "features.json"
    features.write_text(json.dumps(extract_features(session).to_dict(), indent=2))
    bundle = out / session.project_id / session.id / "dashboard.json"
    bundle.write_text(json.dumps(build_dashboard(session).to_dict(), indent=2))
    written += [str(features), str(bundle)]
    _emit(args, {"written": written})
    return 0


def _build_cli_dataset(args):
    from .ml import Representation, build_dataset
    from .storage import list_sessions, load_session

    data_dir = _data_dir(args)
    participants_path = Path(data_dir) / args.project / "participants.json"
    if not participants_path.is_file():
        raise UsageError(f"no participants.json under {data_dir}/{args.project}")
    labels = {
        p["id"]: p["class_label"]
        for p in json.loads(participants_path.read_text())
        if p.get("class_label")
    }
    sessions = [
        load_session(data_dir, args.project, sid) for sid in list_sessions(data_dir, args.project)
    ]
    sessions = [s for s in sessions if s.participant_id in labels]
    if not sessions:
        raise UsageError("no labeled finalized sessions found")
    rep = {"features": Representation.CLINICAL_FEATURES, "raw": Representation.RAW_WINDOWS}[
        "features" if args.representation == "reduced" else args.representation
    ]
    return build_dataset(
        sessions, labels, rep,
        window_s=args.window if rep == Representation.RAW_WINDOWS else None,
        stride_s=args.stride if rep == Representation.RAW_WINDOWS else None,
    )


def _classifier_spec(args):
    from .ml import ClassifierSpec

    spec = ClassifierSpec.from_dict(json.loads(Path(args.spec).read_text()))
    seed = _setting(args, "seed", None)
    if seed is not None:
        spec = ClassifierSpec(spec.kind, dict(spec.hyperparams), int(seed))
    return spec


def _reducer_spec(args):
    from .ml import ReducerSpec

    if args.representation == "reduced":
        return ReducerSpec(args.reducer or "pca", args.components)
    return None


def _cmd_train(args) -> int:
    from .ml import predict, train

    dataset = _build_cli_dataset(args)
    reducer_spec = _reducer_spec(args)
    X = dataset.X
    if reducer_spec is not None:
        from .ml import Representation, Standardizer

        std = Standardizer.fit(X)
        reducer = reducer_spec.fit(std.transform(X), dataset.y)
        dataset = dataset.with_X(reducer.transform(std.transform(X)), Representation.REDUCED)
    spec = _classifier_spec(args)
    model = train(spec, dataset)
    labels, _ = predict(model, dataset.X)
    accuracy = float(np.mean(labels == dataset.y))
    out = args.out or "model.json"
    Path(out).write_text(model.to_json())
    _emit(args, {"model": out, "train_accuracy": accuracy, "n": dataset.n, "d": dataset.d})
    return 0


def _cmd_evaluate(args) -> int:
    from .ml import loso_evaluate

    dataset = _build_cli_dataset(args)
    spec = _classifier_spec(args)
    report = loso_evaluate(
        spec, dataset, _reducer_spec(args), max_workers=max(1, args.parallel)
    )
    payload = report.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2))
    _emit(args, payload)
    return 0


def _cmd_remote(args) -> int:
    import requests

    method, path_tpl = REMOTE_VERBS[args.verb]
    if args.verb == "login":
        if not args.project or not args.secret:
            raise UsageError("remote login needs --project and --secret")
        r = requests.post(
            args.url + path_tpl, json={"project_id": args.project, "secret": args.secret}
        )
        r.raise_for_status()
        _emit(args, r.json())
        return 0

    token = args.token or os.environ.get("GAITWAY_TOKEN")
    if not token:
        raise UsageError("remote verbs need --token (or GAITWAY_TOKEN)")
    path = path_tpl
    if "{participant_id}" in path:
        if not args.participant:
            raise UsageError(f"{args.verb} needs --participant")
        path = path.replace("{participant_id}", args.participant)
    if "{session_id}" in path:
        if not args.session:
            raise UsageError(f"{args.verb} needs --session")
        path = path.replace("{session_id}", args.session)
    if "{run_id}" in path:
        if not args.run_id:
            raise UsageError(f"{args.verb} needs --run-id")
        path = path.replace("{run_id}", args.run_id)

    body = None
    params = None
    if args.verb == "participant-add":
        body = {"id": args.participant, "demographics": json.loads(args.demographics or "{}")}
        if not args.participant:
            raise UsageError("participant-add needs --participant")
    elif args.verb == "label":
        if args.label is None:
            raise UsageError("label needs --label")
        body = {"class_label": args.label}
    elif args.verb == "session-create":
        if not args.participant:
            raise UsageError("session-create needs --participant")
        body = {"participant_id": args.participant}
    elif args.verb == "sync":
        if args.offset is None:
            raise UsageError("sync needs --offset")
        body = {"offset_s": args.offset}
    elif args.verb == "segment":
        if args.start is None or args.end is None or not args.activity:
            raise UsageError("segment needs --start --end --activity")
        body = {"start_s": args.start, "end_s": args.end, "activity_name": args.activity}
    elif args.verb == "mark":
        if args.t is None or not args.name:
            raise UsageError("mark needs --t --name")
        body = {"t_s": args.t, "name": args.name}
    elif args.verb == "overlay":
        if not args.a or not args.b:
            raise UsageError("overlay needs --a --b")
        params = {"a": args.a, "b": args.b}
        if args.lag is not None:
            params["lag"] = args.lag
    elif args.verb == "train":
        if not args.body:
            raise UsageError("train needs --body JSON")
        body = json.loads(args.body)

    r = requests.request(
        method, args.url + path, json=body, params=params,
        headers={"Authorization": f"Bearer {token}"},
    )
    if r.status_code >= 400:
        print(f"error {r.status_code}: {r.text}", file=sys.stderr)
        return 2
    _emit(args, r.json())
    return 0


_COMMANDS = {
    "serve": _cmd_serve,
    "simulate": _cmd_simulate,
    "extract": _cmd_extract,
    "dashboard": _cmd_dashboard,
    "overlay": _cmd_overlay,
    "export": _cmd_export,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "remote": _cmd_remote,
}


def dispatch(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
