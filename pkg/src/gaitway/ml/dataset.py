"""Dataset assembly in the three representations: clinical features, raw
forward-acceleration windows, and reducer outputs."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..features import extract_features, reorient
from ..model import RecordingSession


class DatasetError(ValueError):
    pass


class Representation(str, Enum):
    CLINICAL_FEATURES = "ClinicalFeatures"
    RAW_WINDOWS = "RawWindows"
    REDUCED = "Reduced"


@dataclass(frozen=True)
class Dataset:
    """Example matrix with labels, subject ids, and (optionally) the source
    session of each row, for session-level majority voting over windows."""

    X: np.ndarray
    y: np.ndarray
    subject_ids: tuple[str, ...]
    representation: Representation
    class_names: tuple[str, ...]
    session_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        X, y = np.asarray(self.X, dtype=float), np.asarray(self.y, dtype=int)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        n = X.shape[0]
        if n < 2:
            raise DatasetError(f"need >= 2 examples, got {n}")
        if X.ndim != 2 or len(y) != n or len(self.subject_ids) != n:
            raise DatasetError("X, y, and subject_ids must agree on n")
        if self.session_ids and len(self.session_ids) != n:
            raise DatasetError("session_ids must be empty or length n")
        if not np.all(np.isfinite(X)):
            raise DatasetError("X contains NaN/Inf")
        present = set(int(c) for c in y)
        if not present.issubset(range(len(self.class_names))):
            raise DatasetError("y contains indices outside class_names")
        if len(present) < len(self.class_names):
            missing = [self.class_names[i] for i in range(len(self.class_names)) if i not in present]
            raise DatasetError(f"classes without examples: {missing}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subjects(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for s in self.subject_ids:
            seen.setdefault(s)
        return tuple(seen)

    def with_X(self, X: np.ndarray, representation: Optional[Representation] = None) -> "Dataset":
        return replace(self, X=X, representation=representation or self.representation)


def build_dataset(
    sessions: Sequence[RecordingSession],
    labels: dict[str, str],
    representation: Representation | str,
    window_s: Optional[float] = None,
    stride_s: Optional[float] = None,
) -> Dataset:
    """One row per session (ClinicalFeatures) or per window (RawWindows).

    labels maps participant_id -> class label; class indices follow sorted
    label order. Raw windows are per-window mean-removed here, so no
    cross-subject statistics leak into them.
    """
    representation = Representation(representation)
    if representation == Representation.REDUCED:
        raise DatasetError("Reduced datasets come from applying a fitted reducer")
    if not sessions:
        raise DatasetError("no sessions given")
    for s in sessions:
        if s.participant_id not in labels:
            raise DatasetError(f"participant {s.participant_id} has no class label")
    class_names = tuple(sorted(set(labels[s.participant_id] for s in sessions)))
    class_index = {c: i for i, c in enumerate(class_names)}

    rows, y, subj, sess = [], [], [], []
    if representation == Representation.CLINICAL_FEATURES:
        for s in sessions:
            rows.append(extract_features(s).as_row())
            y.append(class_index[labels[s.participant_id]])
            subj.append(s.participant_id)
            sess.append(s.id)
    else:
        if not window_s or not stride_s:
            raise DatasetError("RawWindows requires window_s and stride_s")
        for s in sessions:
            sig = reorient(s.track)
            rate = sig.rate_hz
            w = int(round(window_s * rate))
            stride = max(1, int(round(stride_s * rate)))
            n = len(sig.forward)
            if w > n:
                raise DatasetError(
                    f"window of {w} samples longer than track of {n} (session {s.id})"
                )
            for start in range(0, n - w + 1, stride):
                win = sig.forward[start : start + w]
                rows.append(win - win.mean())
                y.append(class_index[labels[s.participant_id]])
                subj.append(s.participant_id)
                sess.append(s.id)

    return Dataset(
        X=np.vstack(rows),
        y=np.array(y, dtype=int),
        subject_ids=tuple(subj),
        representation=representation,
        class_names=class_names,
        session_ids=tuple(sess),
    )


@dataclass
class Standardizer:
    """Per-column z-scoring fitted on training data only."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        std = X.std(axis=0)
        std[std == 0] = 1.0  # constant columns pass through centered
        return cls(mean=X.mean(axis=0), std=std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.std
