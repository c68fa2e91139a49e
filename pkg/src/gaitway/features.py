"""Clinical gait features from a finalized accelerometer track.

Pipeline: reorient (find vertical by gravity, forward by gait-band power)
-> low-pass forward acceleration -> prominence-based step peaks -> Weinberg
fourth-root step lengths -> FeatureVector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import signal as sp_signal

from .model import FEATURE_NAMES, FeatureVector, G_MPS2, RecordingSession, SignalTrack

# Step-detection defaults. Peak picking runs on the 3 Hz low-passed forward
# channel; prominence and spacing reject noise and double-counting.
LOWPASS_CUTOFF_HZ = 3.0
PEAK_PROMINENCE_MPS2 = 0.5
MIN_STEP_SPACING_S = 0.25
WEINBERG_K_DEFAULT = 0.45

GAIT_BAND_HZ = (0.5, 3.0)
GRAVITY_MIN_FRACTION = 0.5  # |axis mean| must reach this many g to count as vertical


class FeatureError(ValueError):
    """Track unsuitable for feature extraction."""


@dataclass(frozen=True)
class OrientedSignal:
    """Track rotated into body axes, in m/s^2, gravity removed from vertical."""

    t: np.ndarray
    vertical: np.ndarray
    forward: np.ndarray
    lateral: np.ndarray
    rate_hz: float


@dataclass(frozen=True)
class StepEvent:
    t_peak_s: float
    duration_s: float
    peak_forward_accel_mps2: float
    trough_forward_accel_mps2: float
    length_m: float = 0.0

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise FeatureError(f"step duration must be positive, got {self.duration_s}")
        if self.peak_forward_accel_mps2 < self.trough_forward_accel_mps2:
            raise FeatureError("step peak must be >= trough")
        if self.length_m < 0:
            raise FeatureError("step length must be >= 0")


def lowpass(values: Sequence[float], rate_hz: float, cutoff_hz: float) -> np.ndarray:
    """Zero-phase second-order Butterworth low-pass with unit DC gain."""
    if not 0 < cutoff_hz < rate_hz / 2:
        raise FeatureError(f"cutoff {cutoff_hz} Hz outside (0, {rate_hz / 2}) Hz")
    values = np.asarray(values, dtype=float)
    if len(values) < 10:
        return values.copy()
    b, a = sp_signal.butter(2, cutoff_hz / (rate_hz / 2))
    padlen = min(3 * max(len(a), len(b)), len(values) - 1)
    return sp_signal.filtfilt(b, a, values, padlen=padlen)


def _band_power(values: np.ndarray, rate_hz: float, band: tuple[float, float]) -> float:
    x = values - values.mean()
    spectrum = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(len(x), d=1.0 / rate_hz)
    mask = (freqs >= band[0]) & (freqs <= band[1])
    return float(spectrum[mask].sum())


def reorient(track: SignalTrack) -> OrientedSignal:
    """Identify body axes from the raw device axes.

    Vertical is the axis whose full-track mean carries gravity (largest
    magnitude, must exceed 0.5 g), sign-corrected then mean-subtracted.
    Forward is whichever remaining axis has the most 0.5-3 Hz band power
    after low-pass; the last axis is lateral. Output in m/s^2.
    """
    if track.duration_s < 2.0:
        raise FeatureError(f"track duration {track.duration_s:.3f} s < 2 s")
    rate = track.nominal_rate_hz
    axes = {"x": track.ax, "y": track.ay, "z": track.az}
    means = {k: float(v.mean()) for k, v in axes.items()}
    vertical_name = max(means, key=lambda k: abs(means[k]))
    if abs(means[vertical_name]) < GRAVITY_MIN_FRACTION:
        raise FeatureError(
            "device orientation indeterminate: no axis shows gravity "
            f"(means in g: {', '.join(f'{k}={v:.3f}' for k, v in means.items())})"
        )
    sign = 1.0 if means[vertical_name] >= 0 else -1.0
    vertical_mps2 = sign * axes[vertical_name] * G_MPS2
    vertical = vertical_mps2 - vertical_mps2.mean()

    rest = [k for k in ("x", "y", "z") if k != vertical_name]
    powers = {
        k: _band_power(lowpass(axes[k] * G_MPS2, rate, min(LOWPASS_CUTOFF_HZ, rate / 2 * 0.99)),
                       rate, GAIT_BAND_HZ)
        for k in rest
    }
    forward_name = max(rest, key=lambda k: powers[k])
    lateral_name = rest[0] if rest[1] == forward_name else rest[1]
    return OrientedSignal(
        t=track.t.copy(),
        vertical=vertical,
        forward=axes[forward_name] * G_MPS2,
        lateral=axes[lateral_name] * G_MPS2,
        rate_hz=rate,
    )


def step_length(step: StepEvent, k: float = WEINBERG_K_DEFAULT) -> float:
    """Weinberg estimator: k * (peak - trough acceleration)^(1/4), meters."""
    swing = step.peak_forward_accel_mps2 - step.trough_forward_accel_mps2
    if swing < 0:
        raise FeatureError("step peak must be >= trough")
    return k * swing ** 0.25


def detect_steps(sig: OrientedSignal, k: float = WEINBERG_K_DEFAULT) -> list[StepEvent]:
    """Step events from forward-acceleration peaks.

    Peak/trough amplitudes come from the window between adjacent peaks
    (the last step reuses its preceding window), which makes lengths
    insensitive to DC offsets such as tilt-leaked gravity.
    """
    duration = float(sig.t[-1] - sig.t[0])
    if duration < 2.0:
        raise FeatureError(f"signal duration {duration:.3f} s < 2 s")
    filtered = lowpass(sig.forward, sig.rate_hz, min(LOWPASS_CUTOFF_HZ, sig.rate_hz / 2 * 0.99))
    spacing = max(1, int(round(MIN_STEP_SPACING_S * sig.rate_hz)))
    peaks, _ = sp_signal.find_peaks(filtered, prominence=PEAK_PROMINENCE_MPS2, distance=spacing)
    if len(peaks) == 0:
        return []

    t = sig.t
    events: list[StepEvent] = []
    for i, p in enumerate(peaks):
        if len(peaks) == 1:
            duration_s = duration
            lo, hi = 0, len(filtered) - 1
        elif i < len(peaks) - 1:
            duration_s = float(t[peaks[i + 1]] - t[p])
            lo, hi = p, peaks[i + 1]
        else:
            duration_s = float(t[p] - t[peaks[i - 1]])
            lo, hi = peaks[i - 1], p
        window = filtered[lo : hi + 1]
        peak_a = float(window.max())
        trough_a = float(window.min())
        events.append(
            StepEvent(
                t_peak_s=float(t[p]),
                duration_s=duration_s,
                peak_forward_accel_mps2=peak_a,
                trough_forward_accel_mps2=trough_a,
                length_m=k * (peak_a - trough_a) ** 0.25,
            )
        )
    return events


def extract_features(
    session: RecordingSession,
    segment: Optional[tuple[float, float]] = None,
    k: float = WEINBERG_K_DEFAULT,
) -> FeatureVector:
    """The eight clinical features for a session.

    With no explicit segment, a segment named "6MWT" is used when present,
    otherwise the full track.
    """
    if session.track is None:
        raise FeatureError("session has no track")
    track = session.track
    if segment is None:
        named = session.find_segment("6MWT")
        if named is not None:
            segment = (named[0], named[1])
    if segment is not None:
        start, end = segment
        if start >= end or start < track.t[0] - 1e-9 or end > track.t[-1] + 1e-9:
            raise FeatureError(f"segment [{start}, {end}] outside track range")
        track = track.slice_time(start, end)
        total_duration = float(end - start)
    else:
        total_duration = track.duration_s

    sig = reorient(track)
    steps = detect_steps(sig, k)
    return FeatureVector.from_steps(
        [s.length_m for s in steps], [s.duration_s for s in steps], total_duration
    )


def feature_correlation(vectors: Sequence[FeatureVector]) -> np.ndarray:
    """Pearson correlation across the eight scalar features.

    Returns an 8x8 symmetric matrix with unit diagonal; entries involving a
    constant feature are NaN (undefined).
    """
    if len(vectors) < 2:
        raise FeatureError(f"need >= 2 feature vectors, got {len(vectors)}")
    X = np.vstack([v.as_row() for v in vectors])
    n, d = X.shape
    assert d == len(FEATURE_NAMES)
    centered = X - X.mean(axis=0)
    std = centered.std(axis=0)
    out = np.full((d, d), np.nan)
    np.fill_diagonal(out, 1.0)
    cov = centered.T @ centered / n
    for i in range(d):
        for j in range(i + 1, d):
            if std[i] > 0 and std[j] > 0:
                r = cov[i, j] / (std[i] * std[j])
                out[i, j] = out[j, i] = float(np.clip(r, -1.0, 1.0))
    return out
