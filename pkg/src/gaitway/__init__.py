"""Self-hostable telehealth gait assessment platform."""

from .model import (
    FEATURE_NAMES,
    FeatureVector,
    GaitEventName,
    Participant,
    Project,
    RecordingSession,
    SensorSample,
    SessionState,
    SignalTrack,
)

__version__ = "0.1.0"

__all__ = [
    "FEATURE_NAMES",
    "FeatureVector",
    "GaitEventName",
    "Participant",
    "Project",
    "RecordingSession",
    "SensorSample",
    "SessionState",
    "SignalTrack",
    "__version__",
]
