"""PCA and LDA projections with deterministic sign conventions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg


class ReducerError(ValueError):
    pass


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Make each column's largest-magnitude coordinate positive."""
    out = components.copy()
    for j in range(out.shape[1]):
        k = int(np.argmax(np.abs(out[:, j])))
        if out[k, j] < 0:
            out[:, j] = -out[:, j]
    return out


@dataclass(frozen=True)
class PCAReducer:
    mean: np.ndarray
    components: np.ndarray  # d x k, orthonormal columns
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) @ self.components

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        return np.asarray(Z, dtype=float) @ self.components.T + self.mean

    def to_dict(self) -> dict:
        return {
            "kind": "pca",
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PCAReducer":
        return cls(
            np.array(d["mean"]), np.array(d["components"]), np.array(d["explained_variance"])
        )


def pca_fit(X: np.ndarray, n_components: int) -> PCAReducer:
    """Orthonormal eigenvectors of the centered covariance, eigenvalue-descending."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if not 1 <= n_components <= min(n - 1, d):
        raise ReducerError(f"n_components {n_components} outside 1..{min(n - 1, d)}")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)  # ascending
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    comp = _fix_signs(eigvecs[:, :n_components])
    return PCAReducer(mean=mean, components=comp,
                      explained_variance=np.clip(eigvals[:n_components], 0.0, None))


def pca_transform(reducer: PCAReducer, X: np.ndarray) -> np.ndarray:
    return reducer.transform(X)


@dataclass(frozen=True)
class LDAReducer:
    mean: np.ndarray
    components: np.ndarray  # d x k (k <= C-1)
    eigenvalues: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[1]

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) @ self.components

    def to_dict(self) -> dict:
        return {
            "kind": "lda",
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LDAReducer":
        return cls(np.array(d["mean"]), np.array(d["components"]), np.array(d["eigenvalues"]))


def lda_fit(X: np.ndarray, y: np.ndarray, n_components: int) -> LDAReducer:
    """Fisher projection via the generalized eigenproblem Sb w = l Sw w.

    The within-class scatter is regularized by eps*I with
    eps = 1e-6 * trace(Sw)/d so near-degenerate classes stay solvable.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    classes = np.unique(y)
    C = len(classes)
    if C < 2:
        raise ReducerError("LDA requires at least 2 classes")
    if not 1 <= n_components <= C - 1:
        raise ReducerError(f"n_components {n_components} outside 1..{C - 1} (C={C})")
    d = X.shape[1]
    mean = X.mean(axis=0)
    Sw = np.zeros((d, d))
    Sb = np.zeros((d, d))
    for c in classes:
        Xc = X[y == c]
        mu_c = Xc.mean(axis=0)
        dev = Xc - mu_c
        Sw += dev.T @ dev
        diff = (mu_c - mean).reshape(-1, 1)
        Sb += len(Xc) * (diff @ diff.T)
    eps = 1e-6 * np.trace(Sw) / d
    if eps <= 0:
        eps = 1e-12
    Sw_reg = Sw + eps * np.eye(d)
    eigvals, eigvecs = scipy.linalg.eigh(Sb, Sw_reg)  # ascending
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    comp = _fix_signs(eigvecs[:, :n_components])
    return LDAReducer(mean=mean, components=comp, eigenvalues=eigvals[:n_components])


def lda_transform(reducer: LDAReducer, X: np.ndarray) -> np.ndarray:
    return reducer.transform(X)


@dataclass(frozen=True)
class ReducerSpec:
    """Recipe for fitting a reducer inside each evaluation fold."""

    kind: str  # "pca" | "lda"
    n_components: int

    def __post_init__(self) -> None:
        if self.kind not in ("pca", "lda"):
            raise ReducerError(f"unknown reducer kind {self.kind!r}")
        if self.n_components < 1:
            raise ReducerError("n_components must be >= 1")

    def fit(self, X: np.ndarray, y: Optional[np.ndarray] = None):
        if self.kind == "pca":
            k = min(self.n_components, min(X.shape[0] - 1, X.shape[1]))
            return pca_fit(X, k)
        if y is None:
            raise ReducerError("lda requires labels")
        return lda_fit(X, y, self.n_components)
