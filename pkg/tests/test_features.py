import math

import numpy as np
import pytest

from gaitway.features import (
    FeatureError,
    StepEvent,
    detect_steps,
    extract_features,
    feature_correlation,
    lowpass,
    reorient,
    step_length,
)
from gaitway.model import FEATURE_NAMES, FeatureVector, G_MPS2, RecordingSession, SessionState, SignalTrack
from gaitway.rng import derive
from gaitway.simulator import GaitProfile, preset, synthesize


def gait_track(duration_s=30.0, rate_hz=50.0, cadence=2.0, amplitude=3.0, axes="zy", seed=0):
    """Gravity on axes[0], step pulses on axes[1]; remaining axis is noise."""
    rng = derive(seed, "features-test")
    n = int(duration_s * rate_hz)
    t = np.arange(n) / rate_hz
    pulses = np.zeros(n)
    step = 1.0 / cadence
    for k in np.arange(step / 2, duration_s - step / 2, step):
        pulses += amplitude * np.exp(-((t - k) ** 2) / (2 * (0.15 * step) ** 2))
    channels = {
        axes[0]: 1.0 + 0.02 * rng.standard_normal(n),
        axes[1]: pulses / G_MPS2,
    }
    spare = ({"x", "y", "z"} - set(axes)).pop()
    channels[spare] = 0.01 * rng.standard_normal(n)
    return SignalTrack(t, channels["x"], channels["y"], channels["z"], rate_hz)


class TestReorient:
    def test_gravity_axis_found_and_removed(self):
        track = gait_track(axes="zy")
        sig = reorient(track)
        assert abs(sig.vertical.mean()) < 1e-9
        # vertical must be the (converted, centered) z channel
        expected = track.az * G_MPS2
        assert np.allclose(sig.vertical, expected - expected.mean())

    def test_forward_axis_is_pulse_channel(self):
        track = gait_track(axes="zy")
        sig = reorient(track)
        assert np.allclose(sig.forward, track.ay * G_MPS2)

    def test_permutation_invariance(self):
        a = reorient(gait_track(axes="zy", seed=7))
        b = reorient(gait_track(axes="xy", seed=7))  # gravity moved z -> x
        assert np.allclose(a.vertical, b.vertical)
        assert np.allclose(a.forward, b.forward)

    def test_negative_gravity_sign_corrected(self):
        track = gait_track(axes="zy")
        flipped = SignalTrack(track.t, track.ax, track.ay, -track.az, track.nominal_rate_hz)
        a, b = reorient(track), reorient(flipped)
        assert np.allclose(a.vertical, b.vertical)

    def test_all_zero_is_indeterminate(self):
        n = 200
        t = np.arange(n) / 50.0
        z = np.zeros(n)
        with pytest.raises(FeatureError, match="indeterminate"):
            reorient(SignalTrack(t, z, z, z, 50.0))

    def test_short_track_rejected(self):
        track = gait_track(duration_s=1.0)
        with pytest.raises(FeatureError, match="2 s"):
            reorient(track)


class TestLowpass:
    def test_constant_preserved(self):
        out = lowpass([2.5] * 500, 50.0, 3.0)
        assert np.allclose(out, 2.5, atol=1e-9)

    def test_high_frequency_attenuated(self):
        t = np.arange(500) / 50.0
        sine = np.sin(2 * np.pi * 20.0 * t)
        out = lowpass(sine, 50.0, 3.0)
        # steady-state amplitude, away from the filter edges
        assert np.abs(out[100:-100]).max() < 0.1 * 1.0

    def test_zero_phase_impulse_symmetric(self):
        x = np.zeros(501)
        x[250] = 1.0
        out = lowpass(x, 50.0, 3.0)
        assert np.allclose(out, out[::-1], atol=1e-12)

    def test_cutoff_out_of_range(self):
        with pytest.raises(FeatureError):
            lowpass([0.0] * 100, 50.0, 25.0)
        with pytest.raises(FeatureError):
            lowpass([0.0] * 100, 50.0, 0.0)


class TestStepLength:
    def test_zero_swing(self):
        s = StepEvent(1.0, 0.5, 2.0, 2.0)
        assert step_length(s) == 0.0

    def test_known_value(self):
        s = StepEvent(1.0, 0.5, 16.0, 0.0)
        assert math.isclose(step_length(s, 0.45), 0.9)  # 16^(1/4) = 2

    def test_linear_in_k(self):
        s = StepEvent(1.0, 0.5, 5.0, 1.0)
        assert math.isclose(step_length(s, 0.9), 2 * step_length(s, 0.45))


class TestDetectSteps:
    def test_simulator_ground_truth_count(self):
        profile = GaitProfile(cadence_hz=2.0, step_amplitude_mps2=3.0, seed=11)
        track, truth = synthesize(profile, 30.0, 50.0)
        steps = detect_steps(reorient(track))
        assert abs(len(steps) - truth.num_steps) <= 1
        assert 59 <= len(steps) <= 61

    def test_flat_signal_no_steps(self):
        n = 500
        t = np.arange(n) / 50.0
        z = np.zeros(n)
        track = SignalTrack(t, z, z, z + 1.0, 50.0)
        sig = reorient(track)
        assert detect_steps(sig) == []

    def test_cadence_matches_durations(self):
        profile = GaitProfile(cadence_hz=2.0, step_amplitude_mps2=3.0, seed=3)
        track, _ = synthesize(profile, 30.0, 50.0)
        steps = detect_steps(reorient(track))
        mean_dur = np.mean([s.duration_s for s in steps])
        assert abs(mean_dur - 0.5) / 0.5 < 0.05

    def test_scale_relation(self):
        base = GaitProfile(cadence_hz=1.5, step_amplitude_mps2=2.0, seed=5)
        scaled = GaitProfile(cadence_hz=1.5, step_amplitude_mps2=6.0, seed=5)
        track_a, _ = synthesize(base, 30.0, 50.0)
        track_b, _ = synthesize(scaled, 30.0, 50.0)
        steps_a = detect_steps(reorient(track_a))
        steps_b = detect_steps(reorient(track_b))
        assert len(steps_a) == len(steps_b)
        ratio = np.array([b.length_m / a.length_m for a, b in zip(steps_a, steps_b)])
        assert np.allclose(ratio, 3.0 ** 0.25, rtol=1e-6)


class TestExtractFeatures:
    def test_empty_signal_gives_zero_vector(self):
        n = 500
        t = np.arange(n) / 50.0
        z = np.zeros(n)
        track = SignalTrack(t, z, z, z + 1.0, 50.0)
        session = RecordingSession("s", "p", "pa", SessionState.FINALIZED, track)
        fv = extract_features(session)
        assert fv.num_steps == 0
        assert fv.total_distance_m == 0.0
        assert fv.total_duration_s == pytest.approx(t[-1])

    def test_identities_on_simulator_session(self):
        track, _ = synthesize(preset("typical_child", 1), 40.0, 50.0)
        session = RecordingSession("s", "p", "pa", SessionState.FINALIZED, track)
        fv = extract_features(session)
        fv.check_identities()
        assert fv.num_steps > 0

    def test_six_mwt_segment_used_by_default(self):
        track, truth = synthesize(preset("typical_child", 2), 360.0, 50.0)
        session = RecordingSession(
            "s", "p", "pa", SessionState.FINALIZED, track,
            activity_segments=[(0.0, float(track.t[-1]), "6MWT")],
        )
        fv = extract_features(session)
        rel = abs(fv.total_distance_m - truth.total_distance_m) / truth.total_distance_m
        assert rel < 0.10

    def test_explicit_segment_restricts_duration(self):
        track, _ = synthesize(preset("typical_child", 3), 60.0, 50.0)
        session = RecordingSession("s", "p", "pa", SessionState.FINALIZED, track)
        fv = extract_features(session, segment=(10.0, 30.0))
        assert fv.total_duration_s == pytest.approx(20.0)

    def test_tilt_invariance(self):
        flat = GaitProfile(cadence_hz=2.0, step_amplitude_mps2=4.0, seed=9, device_tilt_deg=0.0)
        tilted = GaitProfile(cadence_hz=2.0, step_amplitude_mps2=4.0, seed=9, device_tilt_deg=10.0)
        fvs = []
        for prof in (flat, tilted):
            track, _ = synthesize(prof, 60.0, 50.0)
            session = RecordingSession("s", "p", "pa", SessionState.FINALIZED, track)
            fvs.append(extract_features(session))
        assert fvs[0].num_steps == fvs[1].num_steps
        rel = abs(fvs[0].total_distance_m - fvs[1].total_distance_m) / fvs[0].total_distance_m
        assert rel < 0.02


class TestFeatureCorrelation:
    def _vectors(self, n=30, seed=0):
        rng = derive(seed, "corr")
        out = []
        for _ in range(n):
            k = int(rng.integers(5, 40))
            lengths = rng.uniform(0.3, 1.2, k)
            durations = rng.uniform(0.3, 0.8, k)
            out.append(FeatureVector.from_steps(lengths, durations, float(k * 0.6 + 5)))
        return out

    def test_unit_diagonal_and_symmetry(self):
        m = feature_correlation(self._vectors())
        assert np.allclose(np.diag(m), 1.0)
        assert np.allclose(m, m.T, equal_nan=True)
        finite = m[np.isfinite(m)]
        assert np.all(finite <= 1.0 + 1e-12) and np.all(finite >= -1.0 - 1e-12)

    def test_matches_direct_formula(self):
        vectors = self._vectors(50, seed=4)
        m = feature_correlation(vectors)
        X = np.vstack([v.as_row() for v in vectors])
        for i in range(len(FEATURE_NAMES)):
            for j in range(len(FEATURE_NAMES)):
                xi, xj = X[:, i], X[:, j]
                denom = np.sqrt(((xi - xi.mean()) ** 2).sum() * ((xj - xj.mean()) ** 2).sum())
                if i == j:
                    continue
                want = float(((xi - xi.mean()) * (xj - xj.mean())).sum() / denom)
                assert math.isclose(m[i, j], want, rel_tol=0, abs_tol=1e-12)

    def test_constant_feature_flagged_nan(self):
        vectors = [
            FeatureVector.from_steps([1.0] * 10, [0.5] * 10, 100.0) for _ in range(5)
        ]
        m = feature_correlation(vectors)
        assert np.isnan(m[0, 1])  # num_steps constant across sessions
        assert m[0, 0] == 1.0

    def test_duplicated_column_correlates_fully(self):
        # equal durations make avg_speed an exact rescale of total_distance
        rng = derive(8, "corr-dup")
        vectors = []
        for _ in range(10):
            k = int(rng.integers(5, 30))
            vectors.append(
                FeatureVector.from_steps(rng.uniform(0.4, 1.0, k), [0.5] * k, 120.0)
            )
        m = feature_correlation(vectors)
        i_dist = FEATURE_NAMES.index("total_distance_m")
        i_speed = FEATURE_NAMES.index("avg_speed_mps")
        assert m[i_dist, i_speed] == pytest.approx(1.0, abs=1e-12)

    def test_needs_two_vectors(self):
        with pytest.raises(FeatureError):
            feature_correlation(self._vectors(1))
