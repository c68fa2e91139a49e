"""Shared domain types: samples, tracks, participants, projects, sessions, features.

Acceleration is stored in g-units (1 g = 9.80665 m/s^2); conversion to m/s^2
happens only at the feature-extraction boundary. All persisted numeric values
are quantized to 9 decimal digits (see q9) so that save/load round-trips are
exact.
"""

from __future__ import annotations

import hashlib
import hmac
import math
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence

import numpy as np

G_MPS2 = 9.80665  # standard gravity, m/s^2 per g


class SessionState(str, Enum):
    OFF = "Off"
    READY = "Ready"
    STREAMING = "Streaming"
    FINALIZED = "Finalized"


class GaitEventName(str, Enum):
    """The canonical eight gait-cycle landmarks. Closed set."""

    INITIAL_CONTACT = "InitialContact"
    OPPOSITE_TOE_OFF = "OppositeToeOff"
    HEEL_RISE = "HeelRise"
    OPPOSITE_INITIAL_CONTACT = "OppositeInitialContact"
    TOE_OFF = "ToeOff"
    FEET_ADJACENT = "FeetAdjacent"
    TIBIA_VERTICAL = "TibiaVertical"
    NEXT_INITIAL_CONTACT = "NextInitialContact"


GAIT_EVENT_NAMES = tuple(e.value for e in GaitEventName)


class ModelError(ValueError):
    """Invalid domain value or violated invariant."""


def q9(x: float) -> float:
    """Quantize to 9 decimal digits, the persisted CSV precision.

    Defined as the save->parse composition so that quantized values survive
    persistence bit-exactly.
    """
    return float(f"{float(x):.9f}")


def q9_array(x: np.ndarray) -> np.ndarray:
    """Vectorized 9-decimal quantization; outputs survive save/load exactly.

    np.round(v, 9) lands on the double nearest a 9-decimal grid point, so
    formatting with %.9f and re-parsing reproduces it (for |v| << 2^53/1e9).
    """
    return np.round(np.asarray(x, dtype=float), 9)


def new_session_id() -> str:
    """Sortable opaque id: millisecond timestamp plus random suffix."""
    return f"{int(time.time() * 1000):013d}-{os.urandom(4).hex()}"


@dataclass(frozen=True)
class SensorSample:
    """One timestamped tri-axial acceleration reading, in g-units.

    t is seconds since session start. aux holds optional named channels
    (e.g. rotation rates) as plain floats.
    """

    t: float
    ax: float
    ay: float
    az: float
    aux: Optional[dict[str, float]] = None

    def __post_init__(self) -> None:
        for name, v in (("t", self.t), ("ax", self.ax), ("ay", self.ay), ("az", self.az)):
            if not math.isfinite(v):
                raise ModelError(f"sample field {name} is not finite: {v!r}")
        if self.t < 0:
            raise ModelError(f"sample t must be non-negative, got {self.t}")
        if self.aux:
            for name, v in self.aux.items():
                if not math.isfinite(v):
                    raise ModelError(f"aux channel {name} is not finite: {v!r}")


class SignalTrack:
    """Immutable, columnar tri-axial acceleration track.

    Timestamps must be strictly increasing. aux maps channel name -> array
    aligned with t.
    """

    __slots__ = ("t", "ax", "ay", "az", "aux", "nominal_rate_hz")

    def __init__(
        self,
        t: np.ndarray,
        ax: np.ndarray,
        ay: np.ndarray,
        az: np.ndarray,
        nominal_rate_hz: float,
        aux: Optional[dict[str, np.ndarray]] = None,
    ) -> None:
        if nominal_rate_hz <= 0:
            raise ModelError(f"nominal_rate_hz must be positive, got {nominal_rate_hz}")
        arrays = {"t": t, "ax": ax, "ay": ay, "az": az}
        aux = {k: np.asarray(v, dtype=float) for k, v in (aux or {}).items()}
        arrays.update(aux)
        n = len(t)
        if n == 0:
            raise ModelError("track must not be empty")
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (n,):
                raise ModelError(f"channel {name} has shape {arr.shape}, expected ({n},)")
            if not np.all(np.isfinite(arr)):
                raise ModelError(f"channel {name} contains non-finite values")
            arrays[name] = arr
        if np.any(np.diff(arrays["t"]) <= 0):
            bad = int(np.argmax(np.diff(arrays["t"]) <= 0)) + 1
            raise ModelError(f"timestamps must strictly increase (violated at index {bad})")
        if arrays["t"][0] < 0:
            raise ModelError("timestamps must be non-negative")
        object.__setattr__(self, "t", arrays["t"])
        object.__setattr__(self, "ax", arrays["ax"])
        object.__setattr__(self, "ay", arrays["ay"])
        object.__setattr__(self, "az", arrays["az"])
        object.__setattr__(self, "aux", {k: arrays[k] for k in aux})
        object.__setattr__(self, "nominal_rate_hz", float(nominal_rate_hz))

    def __setattr__(self, name, value):  # immutable after construction
        raise AttributeError("SignalTrack is immutable")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def duration_s(self) -> float:
        return float(self.t[-1] - self.t[0])

    @property
    def is_regular(self) -> bool:
        """Median inter-sample gap within 20% of the nominal period."""
        if len(self.t) < 2:
            return True
        med = float(np.median(np.diff(self.t)))
        return abs(med - 1.0 / self.nominal_rate_hz) <= 0.2 / self.nominal_rate_hz

    @property
    def aux_names(self) -> tuple[str, ...]:
        return tuple(self.aux)

    def samples(self) -> Iterator[SensorSample]:
        names = self.aux_names
        for i in range(len(self.t)):
            aux = {k: float(self.aux[k][i]) for k in names} if names else None
            yield SensorSample(
                float(self.t[i]), float(self.ax[i]), float(self.ay[i]), float(self.az[i]), aux
            )

    @classmethod
    def from_samples(cls, samples: Sequence[SensorSample], nominal_rate_hz: float) -> "SignalTrack":
        if not samples:
            raise ModelError("track must not be empty")
        aux_names = tuple(samples[0].aux) if samples[0].aux else ()
        cols: dict[str, list[float]] = {k: [] for k in aux_names}
        t, ax, ay, az = [], [], [], []
        for s in samples:
            t.append(s.t)
            ax.append(s.ax)
            ay.append(s.ay)
            az.append(s.az)
            got = tuple(s.aux) if s.aux else ()
            if got != aux_names:
                raise ModelError(f"inconsistent aux channels: {got} vs {aux_names}")
            for k in aux_names:
                cols[k].append(s.aux[k])
        return cls(
            np.array(t), np.array(ax), np.array(ay), np.array(az),
            nominal_rate_hz, {k: np.array(v) for k, v in cols.items()},
        )

    def slice_time(self, start_s: float, end_s: float) -> "SignalTrack":
        """Sub-track with start_s <= t <= end_s (at least 1 sample required)."""
        mask = (self.t >= start_s) & (self.t <= end_s)
        if not np.any(mask):
            raise ModelError(f"no samples in [{start_s}, {end_s}]")
        return SignalTrack(
            self.t[mask], self.ax[mask], self.ay[mask], self.az[mask],
            self.nominal_rate_hz, {k: v[mask] for k, v in self.aux.items()},
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, SignalTrack):
            return NotImplemented
        return (
            self.nominal_rate_hz == other.nominal_rate_hz
            and self.aux_names == other.aux_names
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.ax, other.ax)
            and np.array_equal(self.ay, other.ay)
            and np.array_equal(self.az, other.az)
            and all(np.array_equal(self.aux[k], other.aux[k]) for k in self.aux)
        )


def _hash_secret(secret: str, salt: bytes) -> str:
    dk = hashlib.pbkdf2_hmac("sha256", secret.encode(), salt, 100_000)
    return salt.hex() + ":" + dk.hex()


@dataclass
class Participant:
    id: str
    demographics: dict[str, str] = field(default_factory=dict)
    class_label: Optional[str] = None


@dataclass
class Project:
    """Research project with its own credential and label set."""

    id: str
    name: str
    credential_hash: str
    label_set: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(set(self.label_set)) != len(self.label_set):
            raise ModelError("label_set entries must be distinct")

    @classmethod
    def create(cls, id: str, name: str, secret: str, label_set: Sequence[str] = ()) -> "Project":
        return cls(id, name, _hash_secret(secret, os.urandom(16)), list(label_set))

    def verify_secret(self, secret: str) -> bool:
        salt_hex, _, want = self.credential_hash.partition(":")
        got = _hash_secret(secret, bytes.fromhex(salt_hex)).partition(":")[2]
        return hmac.compare_digest(got, want)


@dataclass
class RecordingSession:
    """One participant activity capture, immutable once Finalized."""

    id: str
    project_id: str
    participant_id: str
    state: SessionState
    track: Optional[SignalTrack]
    activity_segments: list[tuple[float, float, str]] = field(default_factory=list)
    gait_event_marks: list[tuple[float, str]] = field(default_factory=list)
    video_sync_offset_s: Optional[float] = None
    device_meta: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if self.state == SessionState.FINALIZED:
            if self.track is None or len(self.track) == 0:
                raise ModelError("finalized session must have a non-empty track")
            t0, t1 = float(self.track.t[0]), float(self.track.t[-1])
            for start, end, name in self.activity_segments:
                if not (start < end):
                    raise ModelError(f"segment {name!r}: start {start} must be < end {end}")
                if start < t0 - 1e-9 or end > t1 + 1e-9:
                    raise ModelError(
                        f"segment {name!r} [{start}, {end}] outside track range [{t0}, {t1}]"
                    )
            for t_s, name in self.gait_event_marks:
                if name not in GAIT_EVENT_NAMES:
                    raise ModelError(f"unknown gait event name {name!r}")
                if t_s < t0 - 1e-9 or t_s > t1 + 1e-9:
                    raise ModelError(f"event mark at {t_s} outside track range [{t0}, {t1}]")
        if self.video_sync_offset_s is not None and not math.isfinite(self.video_sync_offset_s):
            raise ModelError("video_sync_offset_s must be finite")

    def find_segment(self, name: str) -> Optional[tuple[float, float, str]]:
        for seg in self.activity_segments:
            if seg[2] == name:
                return seg
        return None

    def __eq__(self, other) -> bool:
        if not isinstance(other, RecordingSession):
            return NotImplemented
        return (
            self.id == other.id
            and self.project_id == other.project_id
            and self.participant_id == other.participant_id
            and self.state == other.state
            and self.track == other.track
            and self.activity_segments == other.activity_segments
            and self.gait_event_marks == other.gait_event_marks
            and self.video_sync_offset_s == other.video_sync_offset_s
            and self.device_meta == other.device_meta
        )


# Ordered scalar view of a FeatureVector, used by the correlation matrix and
# the ClinicalFeatures dataset representation. The two list-valued clinical
# features are summarized as dispersion (step lengths) and mean (durations).
FEATURE_NAMES = (
    "num_steps",
    "total_distance_m",
    "step_length_std_m",
    "avg_step_length_m",
    "step_duration_mean_s",
    "total_duration_s",
    "step_frequency_hz",
    "avg_speed_mps",
)


@dataclass(frozen=True)
class FeatureVector:
    """The eight per-session clinical gait features.

    Derived fields are computed in from_steps so the arithmetic identities
    (distance = sum of lengths, speed = distance/duration, frequency =
    steps/duration) hold exactly.
    """

    num_steps: int
    total_distance_m: float
    step_lengths_m: tuple[float, ...]
    avg_step_length_m: float
    step_durations_s: tuple[float, ...]
    total_duration_s: float
    step_frequency_hz: float
    avg_speed_mps: float

    @classmethod
    def from_steps(
        cls,
        step_lengths_m: Sequence[float],
        step_durations_s: Sequence[float],
        total_duration_s: float,
    ) -> "FeatureVector":
        if len(step_lengths_m) != len(step_durations_s):
            raise ModelError("step lengths and durations must have equal length")
        if total_duration_s <= 0:
            raise ModelError(f"total_duration_s must be positive, got {total_duration_s}")
        lengths = tuple(float(v) for v in step_lengths_m)
        durations = tuple(float(v) for v in step_durations_s)
        if any(v < 0 for v in lengths) or any(v <= 0 for v in durations):
            raise ModelError("step lengths must be >= 0 and durations > 0")
        n = len(lengths)
        total = math.fsum(lengths)
        return cls(
            num_steps=n,
            total_distance_m=total,
            step_lengths_m=lengths,
            avg_step_length_m=total / n if n else 0.0,
            step_durations_s=durations,
            total_duration_s=float(total_duration_s),
            step_frequency_hz=n / total_duration_s,
            avg_speed_mps=total / total_duration_s,
        )

    def check_identities(self, rel_tol: float = 1e-9) -> None:
        if self.num_steps != len(self.step_lengths_m) or self.num_steps != len(self.step_durations_s):
            raise ModelError("num_steps must equal count of step lengths and durations")
        checks = [
            ("total_distance_m", self.total_distance_m, math.fsum(self.step_lengths_m)),
            ("avg_speed_mps", self.avg_speed_mps, self.total_distance_m / self.total_duration_s),
            ("step_frequency_hz", self.step_frequency_hz, self.num_steps / self.total_duration_s),
        ]
        if self.num_steps:
            checks.append(
                ("avg_step_length_m", self.avg_step_length_m, self.total_distance_m / self.num_steps)
            )
        for name, got, want in checks:
            if not math.isclose(got, want, rel_tol=rel_tol, abs_tol=1e-12):
                raise ModelError(f"{name} identity violated: {got} vs {want}")
        negatives = [
            v for v in (self.total_distance_m, self.avg_step_length_m, self.total_duration_s,
                        self.step_frequency_hz, self.avg_speed_mps) if v < 0
        ]
        if negatives or any(v < 0 for v in self.step_lengths_m):
            raise ModelError("feature values must be non-negative")

    def as_row(self) -> np.ndarray:
        """Scalar row in FEATURE_NAMES order."""
        lengths = np.array(self.step_lengths_m, dtype=float)
        durations = np.array(self.step_durations_s, dtype=float)
        return np.array(
            [
                float(self.num_steps),
                self.total_distance_m,
                float(np.std(lengths)) if len(lengths) else 0.0,
                self.avg_step_length_m,
                float(np.mean(durations)) if len(durations) else 0.0,
                self.total_duration_s,
                self.step_frequency_hz,
                self.avg_speed_mps,
            ]
        )

    def to_dict(self) -> dict:
        return {
            "num_steps": self.num_steps,
            "total_distance_m": self.total_distance_m,
            "step_lengths_m": list(self.step_lengths_m),
            "avg_step_length_m": self.avg_step_length_m,
            "step_durations_s": list(self.step_durations_s),
            "total_duration_s": self.total_duration_s,
            "step_frequency_hz": self.step_frequency_hz,
            "avg_speed_mps": self.avg_speed_mps,
        }
