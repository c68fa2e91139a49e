"""Leave-one-subject-out evaluation and training-gradient verification.

Standardization and reducers are fitted per fold on training subjects only;
nothing from the held-out subject leaks into the fit. Fold results merge by
subject order, so running folds in parallel cannot change the report.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..rng import derive
from .classifiers import ClassifierKind, ClassifierSpec, mlp_init, mlp_loss_grad, logreg_loss_grad, predict, train_arrays
from .dataset import Dataset, Representation, Standardizer
from .reducers import ReducerSpec


class EvaluationError(ValueError):
    pass


@dataclass
class FoldResult:
    subject_id: str
    unit_ids: list[str]  # session ids (RawWindows) or per-row ids
    y_true: list[int]
    y_pred: list[int]


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # rows: true, cols: predicted
    class_names: tuple[str, ...]
    folds: list[FoldResult] = field(default_factory=list)
    skipped_subjects: list[str] = field(default_factory=list)

    @property
    def n_evaluated(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "class_names": list(self.class_names),
            "folds": [
                {
                    "subject_id": f.subject_id,
                    "unit_ids": f.unit_ids,
                    "y_true": f.y_true,
                    "y_pred": f.y_pred,
                }
                for f in self.folds
            ],
            "skipped_subjects": self.skipped_subjects,
        }


def _majority(labels: np.ndarray, n_classes: int) -> int:
    return int(np.argmax(np.bincount(labels, minlength=n_classes)))


def loso_evaluate(
    spec: ClassifierSpec,
    dataset: Dataset,
    reducer: Optional[ReducerSpec] = None,
    leave_one_row_out: bool = False,
    max_workers: int = 1,
) -> EvalReport:
    """One fold per distinct subject (or per row with leave_one_row_out).

    For RawWindows the held-out subject's sessions are labeled by majority
    vote over their windows, and accuracy counts sessions.
    """
    if leave_one_row_out:
        groups = [str(i) for i in range(dataset.n)]
        row_group = np.arange(dataset.n).astype(str)
    else:
        groups = list(dataset.subjects())
        row_group = np.asarray(dataset.subject_ids)
    if len(groups) < 2:
        raise EvaluationError(f"need >= 2 folds, got {len(groups)}")

    C = len(dataset.class_names)
    raw_windows = dataset.representation == Representation.RAW_WINDOWS
    X_all, y_all = dataset.X, dataset.y
    session_ids = (
        np.asarray(dataset.session_ids)
        if dataset.session_ids
        else np.array([f"row{i}" for i in range(dataset.n)])
    )

    def run_fold(group: str) -> Optional[FoldResult]:
        test_mask = row_group == group
        train_mask = ~test_mask
        y_train = y_all[train_mask]
        if len(np.unique(y_train)) < C:
            return None  # a class vanished from the training split
        X_train, X_test = X_all[train_mask], X_all[test_mask]
        if not raw_windows:
            std = Standardizer.fit(X_train)
            X_train, X_test = std.transform(X_train), std.transform(X_test)
        if reducer is not None:
            red = reducer.fit(X_train, y_train)
            X_train, X_test = red.transform(X_train), red.transform(X_test)
        fold_seed = int(derive(spec.seed, f"fold:{group}").integers(0, 2**63 - 1))
        fold_spec = ClassifierSpec(spec.kind, dict(spec.hyperparams), seed=fold_seed)
        model = train_arrays(fold_spec, X_train, y_train, dataset.class_names)
        pred, _ = predict(model, X_test)

        y_test = y_all[test_mask]
        if raw_windows:
            # aggregate windows to one verdict per session
            sess = session_ids[test_mask]
            unit_ids, y_true, y_pred = [], [], []
            for s in dict.fromkeys(sess):
                m = sess == s
                unit_ids.append(str(s))
                y_true.append(int(y_test[m][0]))
                y_pred.append(_majority(pred[m], C))
            return FoldResult(group, unit_ids, y_true, y_pred)
        return FoldResult(
            group,
            [str(s) for s in session_ids[test_mask]],
            [int(v) for v in y_test],
            [int(v) for v in pred],
        )

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(run_fold, groups))
    else:
        results = [run_fold(g) for g in groups]

    confusion = np.zeros((C, C), dtype=int)
    folds: list[FoldResult] = []
    skipped: list[str] = []
    for group, res in zip(groups, results):
        if res is None:
            skipped.append(group)
            continue
        folds.append(res)
        for t, p in zip(res.y_true, res.y_pred):
            confusion[t, p] += 1
    total = int(confusion.sum())
    if total == 0:
        raise EvaluationError("every fold was skipped; cannot evaluate")
    accuracy = float(np.trace(confusion)) / total
    return EvalReport(accuracy, confusion, dataset.class_names, folds, skipped)


def gradient_check(
    kind: ClassifierKind, X: np.ndarray, y: np.ndarray, seed: int = 0, h: float = 1e-5
) -> float:
    """Max relative error between analytic and central-difference gradients."""
    kind = ClassifierKind(kind)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(X) > 32:
        raise EvaluationError("gradient check expects a small sample (n <= 32)")
    C = int(y.max()) + 1
    Y = np.zeros((len(y), C))
    Y[np.arange(len(y)), y] = 1.0

    if kind == ClassifierKind.LOGISTIC_REGRESSION:
        rng = derive(seed, "gradcheck:logreg")
        W = rng.normal(0, 0.1, size=(X.shape[1], C))
        b = rng.normal(0, 0.1, size=C)
        l2 = 1e-4

        def loss_of(vec):
            Wv = vec[: W.size].reshape(W.shape)
            bv = vec[W.size :]
            return logreg_loss_grad(Wv, bv, X, Y, l2)[0]

        _, gW, gb = logreg_loss_grad(W, b, X, Y, l2)
        theta = np.concatenate([W.ravel(), b])
        analytic = np.concatenate([gW.ravel(), gb])
    elif kind == ClassifierKind.MLP:
        rng = derive(seed, "gradcheck:mlp")
        params = mlp_init(X.shape[1], 16, C, rng)
        shapes = [p.shape for p in params]

        def unpack(vec):
            out, at = [], 0
            for s in shapes:
                size = int(np.prod(s))
                out.append(vec[at : at + size].reshape(s))
                at += size
            return out

        def loss_of(vec):
            return mlp_loss_grad(unpack(vec), X, Y)[0]

        _, grads = mlp_loss_grad(list(params), X, Y)
        theta = np.concatenate([p.ravel() for p in params])
        analytic = np.concatenate([g.ravel() for g in grads])
    else:
        raise EvaluationError(f"gradient check supports LogisticRegression and MLP, not {kind}")

    max_rel = 0.0
    for i in range(len(theta)):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        numeric = (loss_of(tp) - loss_of(tm)) / (2 * h)
        denom = max(abs(analytic[i]), abs(numeric), 1e-8)
        max_rel = max(max_rel, abs(analytic[i] - numeric) / denom)
    return max_rel
