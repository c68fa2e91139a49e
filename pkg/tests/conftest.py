import numpy as np
import pytest

from gaitway.model import RecordingSession, SessionState, SignalTrack, q9_array
from gaitway.rng import derive


def make_track(duration_s=10.0, rate_hz=50.0, seed=0, aux_names=()):
    """Quantized random-walk track with gravity on z."""
    rng = derive(seed, "test-track")
    n = int(duration_s * rate_hz)
    t = np.arange(n) / rate_hz
    ax = 0.02 * rng.standard_normal(n)
    ay = 0.3 * np.sin(2 * np.pi * 1.5 * t) + 0.02 * rng.standard_normal(n)
    az = 1.0 + 0.05 * rng.standard_normal(n)
    aux = {name: q9_array(rng.standard_normal(n)) for name in aux_names}
    return SignalTrack(
        q9_array(t), q9_array(ax), q9_array(ay), q9_array(az), rate_hz, aux or None
    )


def make_session(session_id="s1", project_id="proj", participant_id="p1", **track_kwargs):
    return RecordingSession(
        id=session_id,
        project_id=project_id,
        participant_id=participant_id,
        state=SessionState.FINALIZED,
        track=make_track(**track_kwargs),
    )


@pytest.fixture
def track():
    return make_track()


@pytest.fixture
def session():
    return make_session()
