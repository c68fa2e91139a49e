"""Newline-delimited JSON message grammar and the session state machine.

One message per line. Field-by-field grammar:

  kind          one of Hello, Armed, Start, SampleBatch, Ack, Stop, Error
  session_id    present on every kind except a Hello that asks the server
                to create the session
  Hello         project_id, participant_id, optional session_id, device_meta
  Armed         session_id (server reply to Hello; carries the assigned id)
  Start         session_id (server -> client only)
  SampleBatch   session_id, seq (1-based, +1 per batch), samples: list of
                [t, ax, ay, az, aux...] rows (1..256, t monotone),
                aux_names: names of trailing columns
  Ack           session_id, seq = highest contiguous batch received
  Stop          session_id (either side)
  Error         session_id?, reason, optional expected_seq (seq-gap reject,
                client should retransmit from there)

Unknown kinds are an error; unknown extra fields are ignored.
transition() is a pure total function over (state, message kind, origin);
samples are only ever accepted in Streaming.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, Optional

from .model import SensorSample, SessionState

MAX_BATCH_SAMPLES = 256

Origin = Literal["client", "server"]


class ProtocolError(ValueError):
    """Malformed or ill-typed wire message."""


class MessageKind(str, Enum):
    HELLO = "Hello"
    ARMED = "Armed"
    START = "Start"
    SAMPLE_BATCH = "SampleBatch"
    ACK = "Ack"
    STOP = "Stop"
    ERROR = "Error"


class Effect(str, Enum):
    """Instructions returned by transition() to the machine's owner."""

    ACCEPT_SAMPLES = "accept-samples"
    SEND_ACK = "send-ack"
    SEND_ARMED = "send-armed"
    FINALIZE = "finalize"
    REJECT = "reject"


@dataclass
class Message:
    kind: MessageKind
    session_id: Optional[str] = None
    seq: Optional[int] = None
    project_id: Optional[str] = None
    participant_id: Optional[str] = None
    device_meta: dict = field(default_factory=dict)
    samples: Optional[list[SensorSample]] = None
    aux_names: tuple[str, ...] = ()
    reason: Optional[str] = None
    expected_seq: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind == MessageKind.SAMPLE_BATCH:
            if self.seq is None or self.seq < 1:
                raise ProtocolError("SampleBatch requires seq >= 1")
            n = len(self.samples or [])
            if not 1 <= n <= MAX_BATCH_SAMPLES:
                raise ProtocolError(f"batch size {n} outside 1..{MAX_BATCH_SAMPLES}")


def encode(msg: Message) -> bytes:
    """One JSON object terminated by a newline."""
    obj: dict = {"kind": msg.kind.value}
    if msg.session_id is not None:
        obj["session_id"] = msg.session_id
    if msg.seq is not None:
        obj["seq"] = msg.seq
    if msg.project_id is not None:
        obj["project_id"] = msg.project_id
    if msg.participant_id is not None:
        obj["participant_id"] = msg.participant_id
    if msg.device_meta:
        obj["device_meta"] = msg.device_meta
    if msg.samples is not None:
        aux_names = msg.aux_names or (tuple(msg.samples[0].aux) if msg.samples and msg.samples[0].aux else ())
        rows = []
        for s in msg.samples:
            row = [s.t, s.ax, s.ay, s.az]
            row.extend(s.aux[k] for k in aux_names)
            rows.append(row)
        obj["samples"] = rows
        if aux_names:
            obj["aux_names"] = list(aux_names)
    if msg.reason is not None:
        obj["reason"] = msg.reason
    if msg.expected_seq is not None:
        obj["expected_seq"] = msg.expected_seq
    try:
        return (json.dumps(obj, allow_nan=False) + "\n").encode()
    except ValueError as e:
        raise ProtocolError(f"non-finite numeric field: {e}") from e


def decode(line: bytes | str) -> Message:
    """Parse one complete line into a Message. Extra fields are ignored."""
    if isinstance(line, bytes):
        line = line.decode("utf-8", errors="strict")
    try:
        obj = json.loads(line)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ProtocolError(f"malformed JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ProtocolError("message must be a JSON object")
    kind_raw = obj.get("kind")
    try:
        kind = MessageKind(kind_raw)
    except ValueError:
        raise ProtocolError(f"unknown message kind: {kind_raw!r}") from None

    samples = None
    aux_names: tuple[str, ...] = ()
    if kind == MessageKind.SAMPLE_BATCH:
        for req in ("session_id", "seq", "samples"):
            if req not in obj:
                raise ProtocolError(f"SampleBatch missing required field {req!r}")
        rows = obj["samples"]
        if not isinstance(rows, list) or not 1 <= len(rows) <= MAX_BATCH_SAMPLES:
            raise ProtocolError(
                f"batch size {len(rows) if isinstance(rows, list) else '?'} outside 1..{MAX_BATCH_SAMPLES}"
            )
        aux_names = tuple(obj.get("aux_names", ()))
        samples = []
        for row in rows:
            if not isinstance(row, list) or len(row) != 4 + len(aux_names):
                raise ProtocolError(f"sample row must have {4 + len(aux_names)} values")
            vals = [float(v) for v in row]
            if not all(math.isfinite(v) for v in vals):
                raise ProtocolError("non-finite sample value")
            aux = dict(zip(aux_names, vals[4:])) if aux_names else None
            samples.append(SensorSample(vals[0], vals[1], vals[2], vals[3], aux))
    elif kind == MessageKind.HELLO:
        if "participant_id" not in obj and "session_id" not in obj:
            raise ProtocolError("Hello requires participant_id or session_id")
    elif kind in (MessageKind.ARMED, MessageKind.START, MessageKind.ACK, MessageKind.STOP):
        if "session_id" not in obj:
            raise ProtocolError(f"{kind.value} missing required field 'session_id'")
        if kind == MessageKind.ACK and "seq" not in obj:
            raise ProtocolError("Ack missing required field 'seq'")

    return Message(
        kind=kind,
        session_id=obj.get("session_id"),
        seq=int(obj["seq"]) if obj.get("seq") is not None else None,
        project_id=obj.get("project_id"),
        participant_id=obj.get("participant_id"),
        device_meta=dict(obj.get("device_meta") or {}),
        samples=samples,
        aux_names=aux_names,
        reason=obj.get("reason"),
        expected_seq=int(obj["expected_seq"]) if obj.get("expected_seq") is not None else None,
    )


# The full transition table. Anything absent rejects in place; Error
# messages are informational no-ops in every state. Both endpoints run the
# same table: origin is whoever sent the message (outbound messages are
# applied by their sender, inbound by their receiver).
_S, _K, _E = SessionState, MessageKind, Effect
_TABLE: dict[tuple[SessionState, MessageKind, str], tuple[SessionState, tuple[Effect, ...]]] = {
    (_S.OFF, _K.HELLO, "client"): (_S.READY, (_E.SEND_ARMED,)),
    (_S.READY, _K.START, "server"): (_S.STREAMING, (_E.SEND_ACK,)),
    (_S.READY, _K.ARMED, "server"): (_S.READY, ()),
    (_S.READY, _K.STOP, "client"): (_S.OFF, ()),  # unilateral client disconnect
    (_S.STREAMING, _K.SAMPLE_BATCH, "client"): (_S.STREAMING, (_E.ACCEPT_SAMPLES, _E.SEND_ACK)),
    (_S.STREAMING, _K.START, "server"): (_S.STREAMING, ()),  # duplicate Start is idempotent
    (_S.STREAMING, _K.ACK, "server"): (_S.STREAMING, ()),
    (_S.STREAMING, _K.STOP, "client"): (_S.FINALIZED, (_E.FINALIZE,)),
    (_S.STREAMING, _K.STOP, "server"): (_S.FINALIZED, (_E.FINALIZE,)),
    (_S.FINALIZED, _K.STOP, "client"): (_S.FINALIZED, ()),  # double stop is idempotent
    (_S.FINALIZED, _K.STOP, "server"): (_S.FINALIZED, ()),
}


def transition(
    state: SessionState, msg: Message, origin: Origin
) -> tuple[SessionState, tuple[Effect, ...]]:
    """Pure, total state machine step; returns the new state and effects."""
    if msg.kind == MessageKind.ERROR:
        return state, ()
    return _TABLE.get((state, msg.kind, origin), (state, (Effect.REJECT,)))


class SeqTracker:
    """At-least-once dedup: batches must arrive with seq 1, 2, 3, ...

    check() classifies a batch seq as accept / duplicate / gap without
    mutating; record() advances after an accepted batch.
    """

    def __init__(self) -> None:
        self.expected = 1

    @property
    def highest_contiguous(self) -> int:
        return self.expected - 1

    def check(self, seq: int) -> str:
        if seq == self.expected:
            return "accept"
        if seq < self.expected:
            return "duplicate"
        return "gap"

    def record(self, seq: int) -> None:
        assert seq == self.expected
        self.expected += 1
