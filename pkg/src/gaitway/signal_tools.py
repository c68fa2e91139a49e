"""Dashboard aggregations, two-signal overlay, and resampling.

Everything here is pure computation over finalized sessions; the results
serialize to JSON for the web UI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import detect_steps, reorient
from .model import GAIT_EVENT_NAMES, GaitEventName, RecordingSession  # noqa: F401  (re-export)

VELOCITY_BIN_MPS = 0.1
LENGTH_BIN_M = 0.1
TRACE3D_MAX_POINTS = 5000


class SignalToolError(ValueError):
    pass


@dataclass(frozen=True)
class Histogram:
    bin_edges: tuple[float, ...]
    counts: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"bin_edges": list(self.bin_edges), "counts": list(self.counts)}


@dataclass(frozen=True)
class DashboardBundle:
    """Aggregates behind the four dashboard charts."""

    steps_by_velocity: Histogram
    distance_by_step_length: Histogram
    distance_percent_by_step_length: tuple[float, ...]
    steplen_vs_peak: tuple[tuple[float, float], ...]
    trace3d: tuple[tuple[float, float, float], ...]

    def to_dict(self) -> dict:
        return {
            "steps_by_velocity": self.steps_by_velocity.to_dict(),
            "distance_by_step_length": self.distance_by_step_length.to_dict(),
            "distance_percent_by_step_length": list(self.distance_percent_by_step_length),
            "steplen_vs_peak": [list(p) for p in self.steplen_vs_peak],
            "trace3d": [list(p) for p in self.trace3d],
        }


def _bin_edges(values: np.ndarray, width: float) -> np.ndarray:
    """Fixed-width edges snapped to multiples of width, covering all values."""
    lo = math.floor(values.min() / width + 1e-9)
    hi = math.floor(values.max() / width + 1e-9) + 1
    return np.arange(lo, hi + 1) * width


def build_dashboard(
    session: RecordingSession,
    velocity_bin_mps: float = VELOCITY_BIN_MPS,
    length_bin_m: float = LENGTH_BIN_M,
) -> DashboardBundle:
    """Histograms, scatter, and 3-D trace for one session's steps."""
    track = session.track
    if track is None:
        raise SignalToolError("session has no track")
    steps = detect_steps(reorient(track))

    if steps:
        velocities = np.array([s.length_m / s.duration_s for s in steps])
        lengths = np.array([s.length_m for s in steps])
        v_edges = _bin_edges(velocities, velocity_bin_mps)
        v_counts, _ = np.histogram(velocities, bins=v_edges)
        l_edges = _bin_edges(lengths, length_bin_m)
        dist_per_bin = np.histogram(lengths, bins=l_edges, weights=lengths)[0]
        total = lengths.sum()
        percent = dist_per_bin / total * 100.0 if total > 0 else np.zeros_like(dist_per_bin)
        steps_by_velocity = Histogram(tuple(v_edges), tuple(int(c) for c in v_counts))
        distance_by_step_length = Histogram(tuple(l_edges), tuple(float(v) for v in dist_per_bin))
        percent_t = tuple(float(p) for p in percent)
        scatter = tuple((s.peak_forward_accel_mps2, s.length_m) for s in steps)
    else:
        steps_by_velocity = Histogram((), ())
        distance_by_step_length = Histogram((), ())
        percent_t = ()
        scatter = ()

    n = len(track)
    stride = max(1, math.ceil(n / TRACE3D_MAX_POINTS))
    idx = np.arange(0, n, stride)
    trace3d = tuple(
        (float(track.ax[i]), float(track.ay[i]), float(track.az[i])) for i in idx
    )
    return DashboardBundle(steps_by_velocity, distance_by_step_length, percent_t, scatter, trace3d)


@dataclass(frozen=True)
class AlignResult:
    lag_s: float
    correlation: float


def align(
    a: Sequence[float], b: Sequence[float], rate_hz: float, max_lag_s: float
) -> AlignResult:
    """Lag maximizing normalized cross-correlation over +-max_lag_s.

    Returns lag such that shifting b earlier by lag (b(t - lag) -> a(t))
    best matches a: if b is a delayed by d, the result is +d. Ties prefer
    the smallest |lag|, then negative over positive.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    min_dur = min(len(a), len(b)) / rate_hz
    if len(a) < 2 * rate_hz or len(b) < 2 * rate_hz:
        raise SignalToolError("both signals must be at least 2 s long")
    if max_lag_s > min_dur / 2:
        raise SignalToolError(f"max_lag_s {max_lag_s} > half the shorter duration {min_dur / 2}")
    if a.std() == 0 or b.std() == 0:
        raise SignalToolError("zero-variance input")

    max_lag = int(round(max_lag_s * rate_hz))
    best: tuple[float, float, int] | None = None  # (corr, -|lag| key handled below)
    for lag in range(-max_lag, max_lag + 1):
        # pair a[i] with b[i + lag]: a delayed copy b[i] = a[i - D] peaks at lag = +D
        if lag >= 0:
            n = min(len(a), len(b) - lag)
            if n < 2:
                continue
            xa, xb = a[:n], b[lag : lag + n]
        else:
            n = min(len(a) + lag, len(b))
            if n < 2:
                continue
            xa, xb = a[-lag : -lag + n], b[:n]
        da, db = xa - xa.mean(), xb - xb.mean()
        denom = math.sqrt(float(da @ da) * float(db @ db))
        corr = float(da @ db) / denom if denom > 0 else 0.0
        key = (corr, -abs(lag), -lag)  # ties: smallest |lag|, then negative first
        if best is None or key > best[0]:
            best = (key, lag)
    assert best is not None
    corr = best[0][0]
    return AlignResult(lag_s=best[1] / rate_hz, correlation=corr)


def resample(series: Sequence[float], from_hz: float, to_hz: float) -> np.ndarray:
    """Linear interpolation onto a uniform grid spanning the same time range.

    Endpoints are preserved exactly; the output grid has
    round(duration * to_hz) + 1 points.
    """
    if from_hz <= 0 or to_hz <= 0:
        raise SignalToolError("rates must be positive")
    series = np.asarray(series, dtype=float)
    if len(series) < 2:
        raise SignalToolError("need at least 2 points to resample")
    if from_hz == to_hz:
        return series.copy()
    duration = (len(series) - 1) / from_hz
    n_out = int(round(duration * to_hz)) + 1
    t_in = np.arange(len(series)) / from_hz
    t_out = np.linspace(0.0, duration, n_out)
    return np.interp(t_out, t_in, series)


@dataclass(frozen=True)
class OverlayResult:
    """Time-aligned forward-acceleration pairs, raw and z-scored."""

    t: np.ndarray
    a: np.ndarray
    b: np.ndarray
    a_zscored: np.ndarray
    b_zscored: np.ndarray
    lag_s: float
    rate_hz: float

    def to_dict(self) -> dict:
        return {
            "t": self.t.tolist(),
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "a_zscored": self.a_zscored.tolist(),
            "b_zscored": self.b_zscored.tolist(),
            "lag_s": self.lag_s,
            "rate_hz": self.rate_hz,
        }


def _zscore(x: np.ndarray) -> np.ndarray:
    std = x.std()
    return (x - x.mean()) / std if std > 0 else x - x.mean()


def overlay(
    session_a: RecordingSession,
    session_b: RecordingSession,
    lag_s: Optional[float] = None,
    max_lag_s: float = 5.0,
) -> OverlayResult:
    """Overlay two sessions' forward acceleration on a common timeline."""
    sigs = []
    for s in (session_a, session_b):
        if s.track is None:
            raise SignalToolError(f"session {s.id} has no track")
        sigs.append(reorient(s.track))
    rate = max(sigs[0].rate_hz, sigs[1].rate_hz)
    fa = resample(sigs[0].forward, sigs[0].rate_hz, rate)
    fb = resample(sigs[1].forward, sigs[1].rate_hz, rate)

    if lag_s is None:
        limit = min(max_lag_s, min(len(fa), len(fb)) / rate / 2)
        lag_s = align(fa, fb, rate, limit).lag_s
    shift = int(round(lag_s * rate))
    # b shifted earlier by lag: pair a[i] with b[i + shift]
    if shift >= 0:
        n = min(len(fa), len(fb) - shift)
        if n <= 0:
            raise SignalToolError(f"lag {lag_s} s leaves no overlap")
        pa, pb = fa[:n], fb[shift : shift + n]
    else:
        n = min(len(fa) + shift, len(fb))
        if n <= 0:
            raise SignalToolError(f"lag {lag_s} s leaves no overlap")
        pa, pb = fa[-shift : -shift + n], fb[:n]
    t = np.arange(n) / rate
    return OverlayResult(t, pa, pb, _zscore(pa), _zscore(pb), float(lag_s), rate)
