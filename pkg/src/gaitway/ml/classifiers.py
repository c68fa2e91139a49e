"""The classifier zoo: nine classical kinds plus MLP and its ensemble.

Everything is implemented directly on numpy with fixed, deterministic
defaults; given the same (spec, dataset, seed) the learned parameters are
bit-identical across runs. Models serialize to plain JSON parameter dumps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from ..rng import derive


class ClassifierError(ValueError):
    pass


class ClassifierKind(str, Enum):
    ADA_BOOST = "AdaBoost"
    RANDOM_FOREST = "RandomForest"
    BAGGING = "Bagging"
    GRADIENT_BOOSTING = "GradientBoosting"
    DECISION_TREE = "DecisionTree"
    SVM = "SVM"
    KNN = "KNN"
    GAUSSIAN_NB = "GaussianNB"
    LOGISTIC_REGRESSION = "LogisticRegression"
    MLP = "MLP"
    MLP_ENSEMBLE = "MLPEnsemble"


CLASSICAL_KINDS = (
    ClassifierKind.ADA_BOOST,
    ClassifierKind.RANDOM_FOREST,
    ClassifierKind.BAGGING,
    ClassifierKind.GRADIENT_BOOSTING,
    ClassifierKind.DECISION_TREE,
    ClassifierKind.SVM,
    ClassifierKind.KNN,
    ClassifierKind.GAUSSIAN_NB,
    ClassifierKind.LOGISTIC_REGRESSION,
)

_DEFAULTS: dict[ClassifierKind, dict] = {
    ClassifierKind.DECISION_TREE: {"max_depth": 5},
    ClassifierKind.ADA_BOOST: {"n_estimators": 50},
    ClassifierKind.RANDOM_FOREST: {"n_estimators": 100, "max_depth": 5},
    ClassifierKind.BAGGING: {"n_estimators": 50, "max_depth": 5},
    ClassifierKind.GRADIENT_BOOSTING: {"n_estimators": 100, "max_depth": 2, "learning_rate": 0.1},
    ClassifierKind.SVM: {"epochs": 500, "learning_rate": 0.1, "reg_lambda": 1e-3},
    ClassifierKind.KNN: {"k": 5},
    ClassifierKind.GAUSSIAN_NB: {"var_floor": 1e-9},
    ClassifierKind.LOGISTIC_REGRESSION: {"epochs": 500, "learning_rate": 0.1, "l2": 1e-4},
    ClassifierKind.MLP: {"hidden_sizes": [16], "epochs": 200, "learning_rate": 0.05},
    ClassifierKind.MLP_ENSEMBLE: {
        "hidden_sizes": [16], "epochs": 200, "learning_rate": 0.05, "ensemble_size": 5,
    },
}

_POSITIVE_INT_KEYS = ("n_estimators", "max_depth", "epochs", "k", "ensemble_size")


@dataclass(frozen=True)
class ClassifierSpec:
    kind: ClassifierKind
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        kind = ClassifierKind(self.kind)
        object.__setattr__(self, "kind", kind)
        allowed = set(_DEFAULTS[kind])
        unknown = set(self.hyperparams) - allowed
        if unknown:
            raise ClassifierError(f"{kind.value} does not take hyperparams {sorted(unknown)}")
        hp = {**_DEFAULTS[kind], **self.hyperparams}
        for key in _POSITIVE_INT_KEYS:
            if key in hp and (int(hp[key]) != hp[key] or hp[key] < 1):
                raise ClassifierError(f"{key} must be a positive integer, got {hp[key]!r}")
        for key in ("learning_rate", "reg_lambda", "l2", "var_floor"):
            if key in hp and not hp[key] > 0:
                raise ClassifierError(f"{key} must be positive, got {hp[key]!r}")
        if "hidden_sizes" in hp:
            hs = list(hp["hidden_sizes"])
            if len(hs) != 1 or int(hs[0]) < 1:
                raise ClassifierError("hidden_sizes must be a single positive layer width")
            hp["hidden_sizes"] = hs
        object.__setattr__(self, "hyperparams", hp)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "hyperparams": self.hyperparams, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierSpec":
        return cls(ClassifierKind(d["kind"]), dict(d.get("hyperparams", {})), int(d.get("seed", 0)))


@dataclass(frozen=True)
class TrainedModel:
    spec: ClassifierSpec
    class_names: tuple[str, ...]
    n_features: int
    params: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "spec": self.spec.to_dict(),
                "class_names": list(self.class_names),
                "n_features": self.n_features,
                "params": self.params,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        d = json.loads(text)
        return cls(
            spec=ClassifierSpec.from_dict(d["spec"]),
            class_names=tuple(d["class_names"]),
            n_features=int(d["n_features"]),
            params=d["params"],
        )


# ---------------------------------------------------------------------------
# Weighted CART. Nodes are plain dicts so trees serialize as-is:
# internal {"f": feature, "t": threshold, "l": ..., "r": ...},
# classification leaf {"c": class_index}, regression leaf {"v": value}.

def _class_leaf(weight_sums: np.ndarray) -> dict:
    return {"c": int(np.argmax(weight_sums))}  # argmax ties break to lower index


def _best_split(
    X: np.ndarray, M: np.ndarray, feature_ids: np.ndarray
) -> Optional[tuple[int, float, np.ndarray]]:
    """Best weighted-Gini split over the given features.

    M is the n x C matrix of per-sample class weights. Returns
    (feature, threshold, left_mask) or None when no split improves purity.
    """
    total = M.sum(axis=0)
    W = total.sum()
    parent = W * (1.0 - float(np.square(total / W).sum()))
    best_score = parent - 1e-12  # must strictly improve
    best: Optional[tuple[int, float, np.ndarray]] = None
    for f in feature_ids:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            continue
        cum = np.cumsum(M[order], axis=0)[:-1]  # split after position i
        w_left = cum.sum(axis=1)
        w_right = W - w_left
        right = total - cum
        with np.errstate(divide="ignore", invalid="ignore"):
            gini_l = w_left - np.square(cum).sum(axis=1) / w_left
            gini_r = w_right - np.square(right).sum(axis=1) / w_right
        score = np.where((w_left > 0) & (w_right > 0), gini_l + gini_r, np.inf)
        score = np.where(valid, score, np.inf)
        i = int(np.argmin(score))
        if score[i] < best_score:
            best_score = float(score[i])
            thr = (xs[i] + xs[i + 1]) / 2.0
            best = (int(f), thr, X[:, f] <= thr)
    return best


def _grow_class_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    sample_weight: np.ndarray,
    max_depth: int,
    max_features: Optional[int],
    rng: Optional[np.random.Generator],
    depth: int = 0,
) -> dict:
    M = np.zeros((len(y), n_classes))
    M[np.arange(len(y)), y] = sample_weight
    sums = M.sum(axis=0)
    if depth >= max_depth or len(y) < 2 or np.count_nonzero(sums) <= 1:
        return _class_leaf(sums)
    d = X.shape[1]
    if max_features is not None and max_features < d:
        feature_ids = np.sort(rng.choice(d, size=max_features, replace=False))
    else:
        feature_ids = np.arange(d)
    split = _best_split(X, M, feature_ids)
    if split is None:
        return _class_leaf(sums)
    f, thr, left = split
    return {
        "f": f,
        "t": float(thr),
        "l": _grow_class_tree(X[left], y[left], n_classes, sample_weight[left],
                              max_depth, max_features, rng, depth + 1),
        "r": _grow_class_tree(X[~left], y[~left], n_classes, sample_weight[~left],
                              max_depth, max_features, rng, depth + 1),
    }


def _grow_reg_tree(
    X: np.ndarray, grad: np.ndarray, hess: np.ndarray, max_depth: int, depth: int = 0
) -> dict:
    """Squared-error regression tree with Newton leaf values (sum g / sum h)."""

    def leaf() -> dict:
        return {"v": float(grad.sum() / max(hess.sum(), 1e-12))}

    n = len(grad)
    if depth >= max_depth or n < 2:
        return leaf()
    S, Q = grad.sum(), float(np.square(grad).sum())
    best_gain = 1e-12
    best: Optional[tuple[int, float, np.ndarray]] = None
    parent_sse = Q - S * S / n
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        valid = xs[:-1] < xs[1:]
        if not valid.any():
            continue
        cg = np.cumsum(grad[order])[:-1]
        nl = np.arange(1, n)
        sse = parent_sse - (np.square(cg) / nl + np.square(S - cg) / (n - nl)) + S * S / n
        gain = np.where(valid, parent_sse - sse, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > best_gain:
            best_gain = float(gain[i])
            thr = (xs[i] + xs[i + 1]) / 2.0
            best = (f, thr, X[:, f] <= thr)
    if best is None:
        return leaf()
    f, thr, left = best
    return {
        "f": f,
        "t": float(thr),
        "l": _grow_reg_tree(X[left], grad[left], hess[left], max_depth, depth + 1),
        "r": _grow_reg_tree(X[~left], grad[~left], hess[~left], max_depth, depth + 1),
    }


def _tree_apply(node: dict, X: np.ndarray, leaf_key: str) -> np.ndarray:
    out = np.empty(len(X))
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, idx = stack.pop()
        if len(idx) == 0:
            continue
        if leaf_key in nd:
            out[idx] = nd[leaf_key]
            continue
        mask = X[idx, nd["f"]] <= nd["t"]
        stack.append((nd["l"], idx[mask]))
        stack.append((nd["r"], idx[~mask]))
    return out


def _vote(per_member: np.ndarray, n_classes: int, weights: Optional[np.ndarray] = None):
    """Majority vote over members (rows: members, cols: examples)."""
    n = per_member.shape[1]
    scores = np.zeros((n, n_classes))
    for m in range(per_member.shape[0]):
        w = 1.0 if weights is None else weights[m]
        scores[np.arange(n), per_member[m].astype(int)] += w
    totals = scores.sum(axis=1, keepdims=True)
    probs = np.where(totals > 0, scores / np.where(totals == 0, 1, totals), 1.0 / n_classes)
    return np.argmax(scores, axis=1), probs


def _softmax(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    e = np.exp(Z)
    return e / e.sum(axis=1, keepdims=True)


def _one_hot(y: np.ndarray, C: int) -> np.ndarray:
    Y = np.zeros((len(y), C))
    Y[np.arange(len(y)), y] = 1.0
    return Y


# ---------------------------------------------------------------------------
# Fit functions. Each returns a JSON-able params dict.

def _fit_decision_tree(X, y, C, hp, seed):
    w = np.ones(len(y))
    return {"tree": _grow_class_tree(X, y, C, w, hp["max_depth"], None, None)}


def _fit_forest(X, y, C, hp, seed, subsample_features: bool):
    n, d = X.shape
    max_features = max(1, int(round(math.sqrt(d)))) if subsample_features else None
    trees = []
    for i in range(hp["n_estimators"]):
        rng = derive(seed, f"tree:{i}")
        idx = rng.integers(0, n, size=n)
        trees.append(
            _grow_class_tree(X[idx], y[idx], C, np.ones(n), hp["max_depth"], max_features, rng)
        )
    return {"trees": trees}


def _fit_adaboost(X, y, C, hp, seed):
    n = len(y)
    w = np.full(n, 1.0 / n)
    stumps, alphas, staged = [], [], []
    ensemble_scores = np.zeros((n, C))
    for _ in range(hp["n_estimators"]):
        stump = _grow_class_tree(X, y, C, w, 1, None, None)
        pred = _tree_apply(stump, X, "c").astype(int)
        err = float(w[pred != y].sum() / w.sum())
        if err >= 1.0 - 1.0 / C:  # no better than chance: stop
            if not stumps:
                stumps.append(stump)
                alphas.append(1.0)
                ensemble_scores[np.arange(n), pred] += 1.0
                staged.append(float(np.mean(np.argmax(ensemble_scores, axis=1) != y)))
            break
        alpha = math.log((1.0 - err) / max(err, 1e-16)) + math.log(C - 1)
        stumps.append(stump)
        alphas.append(alpha)
        ensemble_scores[np.arange(n), pred] += alpha
        staged.append(float(np.mean(np.argmax(ensemble_scores, axis=1) != y)))
        if err == 0.0:
            break
        w = w * np.exp(alpha * (pred != y))
        w = w / w.sum()
    return {"stumps": stumps, "alphas": alphas, "staged_train_error": staged}


def _fit_gradient_boosting(X, y, C, hp, seed):
    n = len(y)
    models = []
    for c in range(C):  # one-vs-rest, every class
        t = (y == c).astype(float)
        p0 = min(max(t.mean(), 1e-12), 1 - 1e-12)
        f0 = math.log(p0 / (1 - p0))
        F = np.full(n, f0)
        trees = []
        for _ in range(hp["n_estimators"]):
            p = 1.0 / (1.0 + np.exp(-F))
            tree = _grow_reg_tree(X, t - p, p * (1 - p), hp["max_depth"])
            F = F + hp["learning_rate"] * _tree_apply(tree, X, "v")
            trees.append(tree)
        models.append({"f0": f0, "trees": trees})
    return {"models": models, "learning_rate": hp["learning_rate"]}


def _fit_svm(X, y, C, hp, seed):
    lam, lr0, epochs = hp["reg_lambda"], hp["learning_rate"], hp["epochs"]
    n, d = X.shape

    def fit_binary(t):  # t in {-1, +1}
        w = np.zeros(d)
        b = 0.0
        for epoch in range(epochs):
            margin = t * (X @ w + b)
            viol = margin < 1.0
            gw = lam * w - (t[viol, None] * X[viol]).sum(axis=0) / n
            gb = -t[viol].sum() / n
            lr = lr0 / (1.0 + lam * epoch)
            w -= lr * gw
            b -= lr * gb
        return w, b

    planes = []
    if C == 2:
        w, b = fit_binary(np.where(y == 1, 1.0, -1.0))
        planes.append({"w": w.tolist(), "b": b})
    else:
        for c in range(C):
            w, b = fit_binary(np.where(y == c, 1.0, -1.0))
            planes.append({"w": w.tolist(), "b": b})
    return {"planes": planes}


def _fit_knn(X, y, C, hp, seed):
    return {"X": X.tolist(), "y": y.tolist(), "k": hp["k"]}


def _fit_gaussian_nb(X, y, C, hp, seed):
    means, variances, priors = [], [], []
    for c in range(C):
        Xc = X[y == c]
        means.append(Xc.mean(axis=0).tolist())
        variances.append(np.maximum(Xc.var(axis=0), hp["var_floor"]).tolist())
        priors.append(len(Xc) / len(y))
    return {"means": means, "variances": variances, "priors": priors}


def logreg_loss_grad(W, b, X, Y, l2):
    """Multinomial cross-entropy with L2 on weights (not bias)."""
    n = len(X)
    P = _softmax(X @ W + b)
    eps = 1e-15
    loss = -float(np.sum(Y * np.log(P + eps))) / n + 0.5 * l2 * float(np.sum(W * W))
    gW = X.T @ (P - Y) / n + l2 * W
    gb = (P - Y).sum(axis=0) / n
    return loss, gW, gb


def _fit_logreg(X, y, C, hp, seed):
    d = X.shape[1]
    W = np.zeros((d, C))
    b = np.zeros(C)
    Y = _one_hot(y, C)
    curve = []
    for _ in range(hp["epochs"]):
        loss, gW, gb = logreg_loss_grad(W, b, X, Y, hp["l2"])
        curve.append(loss)
        W -= hp["learning_rate"] * gW
        b -= hp["learning_rate"] * gb
    return {"W": W.tolist(), "b": b.tolist(), "loss_curve": curve}


def mlp_init(d: int, hidden: int, C: int, rng: np.random.Generator):
    W1 = rng.normal(0.0, 1.0 / math.sqrt(d), size=(d, hidden))
    b1 = np.zeros(hidden)
    W2 = rng.normal(0.0, 1.0 / math.sqrt(hidden), size=(hidden, C))
    b2 = np.zeros(C)
    return W1, b1, W2, b2


def mlp_loss_grad(params, X, Y):
    """One tanh hidden layer, softmax output, mean cross-entropy."""
    W1, b1, W2, b2 = params
    n = len(X)
    H = np.tanh(X @ W1 + b1)
    P = _softmax(H @ W2 + b2)
    eps = 1e-15
    loss = -float(np.sum(Y * np.log(P + eps))) / n
    dZ2 = (P - Y) / n
    gW2 = H.T @ dZ2
    gb2 = dZ2.sum(axis=0)
    dH = dZ2 @ W2.T * (1.0 - H * H)
    gW1 = X.T @ dH
    gb1 = dH.sum(axis=0)
    return loss, (gW1, gb1, gW2, gb2)


def _fit_single_mlp(X, y, C, hp, seed, label="mlp"):
    hidden = int(hp["hidden_sizes"][0])
    rng = derive(seed, label)
    params = list(mlp_init(X.shape[1], hidden, C, rng))
    Y = _one_hot(y, C)
    lr = hp["learning_rate"]
    curve = []
    for _ in range(hp["epochs"]):
        loss, grads = mlp_loss_grad(params, X, Y)
        curve.append(loss)
        for p, g in zip(params, grads):
            p -= lr * g
    return {
        "W1": params[0].tolist(), "b1": params[1].tolist(),
        "W2": params[2].tolist(), "b2": params[3].tolist(),
        "loss_curve": curve,
    }


def _fit_mlp_ensemble(X, y, C, hp, seed):
    members = [
        _fit_single_mlp(X, y, C, hp, seed + i, label=f"member:{i}")
        for i in range(hp["ensemble_size"])
    ]
    return {"members": members}


def train(spec: ClassifierSpec, dataset) -> TrainedModel:
    """Fit a classifier on a Dataset (or anything with X, y, class_names)."""
    X = np.asarray(dataset.X, dtype=float)
    y = np.asarray(dataset.y, dtype=int)
    class_names = tuple(dataset.class_names)
    return train_arrays(spec, X, y, class_names)


def train_arrays(
    spec: ClassifierSpec, X: np.ndarray, y: np.ndarray, class_names: tuple[str, ...]
) -> TrainedModel:
    C = len(class_names)
    if C < 2:
        raise ClassifierError("training requires at least 2 classes")
    if len(np.unique(y)) < 2:
        raise ClassifierError("training data is degenerate: a single class present")
    if not np.all(np.isfinite(X)):
        raise ClassifierError("X contains NaN/Inf")
    hp, seed = spec.hyperparams, spec.seed
    kind = spec.kind
    if kind == ClassifierKind.DECISION_TREE:
        params = _fit_decision_tree(X, y, C, hp, seed)
    elif kind == ClassifierKind.RANDOM_FOREST:
        params = _fit_forest(X, y, C, hp, seed, subsample_features=True)
    elif kind == ClassifierKind.BAGGING:
        params = _fit_forest(X, y, C, hp, seed, subsample_features=False)
    elif kind == ClassifierKind.ADA_BOOST:
        params = _fit_adaboost(X, y, C, hp, seed)
    elif kind == ClassifierKind.GRADIENT_BOOSTING:
        params = _fit_gradient_boosting(X, y, C, hp, seed)
    elif kind == ClassifierKind.SVM:
        params = _fit_svm(X, y, C, hp, seed)
    elif kind == ClassifierKind.KNN:
        params = _fit_knn(X, y, C, hp, seed)
    elif kind == ClassifierKind.GAUSSIAN_NB:
        params = _fit_gaussian_nb(X, y, C, hp, seed)
    elif kind == ClassifierKind.LOGISTIC_REGRESSION:
        params = _fit_logreg(X, y, C, hp, seed)
    elif kind == ClassifierKind.MLP:
        params = _fit_single_mlp(X, y, C, hp, seed)
    elif kind == ClassifierKind.MLP_ENSEMBLE:
        params = _fit_mlp_ensemble(X, y, C, hp, seed)
    else:  # pragma: no cover
        raise ClassifierError(f"unhandled kind {kind}")
    return TrainedModel(spec=spec, class_names=class_names, n_features=X.shape[1], params=params)


# ---------------------------------------------------------------------------
# Prediction.

def predict(model: TrainedModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Class indices and per-class scores (probabilities where meaningful)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ClassifierError(f"expected {model.n_features} features, got {X.shape[1]}")
    C = len(model.class_names)
    p = model.params
    kind = model.spec.kind

    if kind == ClassifierKind.DECISION_TREE:
        labels = _tree_apply(p["tree"], X, "c").astype(int)
        return labels, _one_hot(labels, C)
    if kind in (ClassifierKind.RANDOM_FOREST, ClassifierKind.BAGGING):
        votes = np.vstack([_tree_apply(t, X, "c") for t in p["trees"]])
        return _vote(votes, C)
    if kind == ClassifierKind.ADA_BOOST:
        votes = np.vstack([_tree_apply(s, X, "c") for s in p["stumps"]])
        return _vote(votes, C, np.asarray(p["alphas"], dtype=float))
    if kind == ClassifierKind.GRADIENT_BOOSTING:
        margins = np.zeros((len(X), C))
        for c, m in enumerate(p["models"]):
            F = np.full(len(X), m["f0"])
            for tree in m["trees"]:
                F = F + p["learning_rate"] * _tree_apply(tree, X, "v")
            margins[:, c] = F
        probs = 1.0 / (1.0 + np.exp(-margins))
        probs = probs / probs.sum(axis=1, keepdims=True)
        return np.argmax(margins, axis=1), probs
    if kind == ClassifierKind.SVM:
        planes = p["planes"]
        if C == 2 and len(planes) == 1:
            margin = X @ np.asarray(planes[0]["w"]) + planes[0]["b"]
            scores = np.column_stack([-margin, margin])
            return (margin > 0).astype(int), scores
        scores = np.column_stack(
            [X @ np.asarray(pl["w"]) + pl["b"] for pl in planes]
        )
        return np.argmax(scores, axis=1), scores
    if kind == ClassifierKind.KNN:
        Xt = np.asarray(p["X"], dtype=float)
        yt = np.asarray(p["y"], dtype=int)
        k = min(int(p["k"]), len(yt))
        # gram trick keeps memory at n_test x n_train
        d2 = np.maximum(
            np.square(X).sum(axis=1)[:, None]
            + np.square(Xt).sum(axis=1)[None, :]
            - 2.0 * X @ Xt.T,
            0.0,
        )
        labels = np.empty(len(X), dtype=int)
        scores = np.zeros((len(X), C))
        for i in range(len(X)):
            nearest = np.argsort(d2[i], kind="stable")[:k]
            counts = np.bincount(yt[nearest], minlength=C)
            labels[i] = int(np.argmax(counts))  # vote ties -> lower class index
            scores[i] = counts / k
        return labels, scores
    if kind == ClassifierKind.GAUSSIAN_NB:
        means = np.asarray(p["means"], dtype=float)
        variances = np.asarray(p["variances"], dtype=float)
        priors = np.asarray(p["priors"], dtype=float)
        log_post = np.empty((len(X), C))
        for c in range(C):
            diff = X - means[c]
            log_like = -0.5 * np.sum(
                np.log(2 * np.pi * variances[c]) + diff * diff / variances[c], axis=1
            )
            log_post[:, c] = log_like + math.log(priors[c])
        return np.argmax(log_post, axis=1), _softmax(log_post)
    if kind == ClassifierKind.LOGISTIC_REGRESSION:
        P = _softmax(X @ np.asarray(p["W"], dtype=float) + np.asarray(p["b"], dtype=float))
        return np.argmax(P, axis=1), P
    if kind == ClassifierKind.MLP:
        return _mlp_predict(p, X)
    if kind == ClassifierKind.MLP_ENSEMBLE:
        votes = np.vstack([_mlp_predict(m, X)[0] for m in p["members"]])
        return _vote(votes, C)
    raise ClassifierError(f"unhandled kind {kind}")  # pragma: no cover


def _mlp_predict(params: dict, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    H = np.tanh(X @ np.asarray(params["W1"], dtype=float) + np.asarray(params["b1"], dtype=float))
    P = _softmax(H @ np.asarray(params["W2"], dtype=float) + np.asarray(params["b2"], dtype=float))
    return np.argmax(P, axis=1), P
