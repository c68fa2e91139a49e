import numpy as np
import pytest

from gaitway.ml.classifiers import (
    CLASSICAL_KINDS,
    ClassifierError,
    ClassifierKind,
    ClassifierSpec,
    TrainedModel,
    predict,
    train_arrays,
)
from gaitway.rng import derive

CLASSES = ("neg", "pos")


def blobs(n_per=20, sep=6.0, d=2, n_classes=2, seed=0):
    rng = derive(seed, "blobs")
    X, y = [], []
    for c in range(n_classes):
        center = np.zeros(d)
        center[c % d] = c * sep
        X.append(rng.standard_normal((n_per, d)) + center)
        y += [c] * n_per
    names = tuple(f"c{i}" for i in range(n_classes))
    return np.vstack(X), np.array(y), names


def fit(kind, X, y, names, seed=0, **hp):
    from gaitway.ml.classifiers import _DEFAULTS

    hp = {k: v for k, v in hp.items() if k in _DEFAULTS[ClassifierKind(kind)]}
    return train_arrays(ClassifierSpec(kind, hp, seed), X, y, names)


class TestSpecValidation:
    def test_unknown_hyperparam_rejected(self):
        with pytest.raises(ClassifierError):
            ClassifierSpec(ClassifierKind.KNN, {"depth": 3})

    def test_bad_values_rejected(self):
        with pytest.raises(ClassifierError):
            ClassifierSpec(ClassifierKind.KNN, {"k": 0})
        with pytest.raises(ClassifierError):
            ClassifierSpec(ClassifierKind.MLP, {"learning_rate": -1.0})
        with pytest.raises(ClassifierError):
            ClassifierSpec(ClassifierKind.MLP, {"hidden_sizes": [8, 8]})

    def test_defaults_filled(self):
        spec = ClassifierSpec(ClassifierKind.RANDOM_FOREST)
        assert spec.hyperparams["n_estimators"] == 100


class TestTrainingBehaviour:
    @pytest.mark.parametrize("kind", list(ClassifierKind))
    def test_separable_blobs_learned(self, kind):
        X, y, names = blobs(n_per=20, sep=6.0)
        model = fit(kind, X, y, names, epochs=300)
        labels, scores = predict(model, X)
        assert np.mean(labels == y) >= 0.95
        assert scores.shape == (len(y), 2)

    def test_adaboost_perfect_on_separable(self):
        X, y, names = blobs(n_per=20, sep=8.0)
        model = fit(ClassifierKind.ADA_BOOST, X, y, names)
        labels, _ = predict(model, X)
        assert np.mean(labels == y) == 1.0

    def test_adaboost_training_error_non_increasing_on_separable(self):
        X, y, names = blobs(n_per=30, sep=6.0, seed=3)
        model = fit(ClassifierKind.ADA_BOOST, X, y, names)
        staged = model.params["staged_train_error"]
        assert all(b <= a + 1e-12 for a, b in zip(staged, staged[1:]))
        assert staged[-1] == 0.0

    def test_adaboost_drives_error_to_zero_on_diagonal_margin(self):
        # separable by x+y=0 but not by any single stump: the ensemble must
        # still reach zero training error within the default rounds
        rng = derive(21, "diag")
        n = 30
        X0 = rng.standard_normal((n, 2))
        X0 = X0 - (X0.sum(1)[:, None] + 1.0) * 0.5
        X1 = rng.standard_normal((n, 2))
        X1 = X1 - (X1.sum(1)[:, None] - 1.0) * 0.5
        X = np.vstack([X0, X1])
        y = np.array([0] * n + [1] * n)
        model = fit(ClassifierKind.ADA_BOOST, X, y, CLASSES)
        assert model.params["staged_train_error"][-1] == 0.0

    def test_knn_k1_memorizes(self):
        X, y, names = blobs(n_per=15, sep=2.0, seed=5)
        model = fit(ClassifierKind.KNN, X, y, names, k=1)
        labels, _ = predict(model, X)
        assert np.array_equal(labels, y)

    def test_gaussian_nb_boundary_near_midpoint(self):
        rng = derive(7, "nb")
        n = 4000
        X = np.concatenate([rng.normal(-3, 1, n), rng.normal(3, 1, n)])[:, None]
        y = np.array([0] * n + [1] * n)
        model = fit(ClassifierKind.GAUSSIAN_NB, X, y, CLASSES)
        grid = np.linspace(-1.0, 1.0, 2001)[:, None]
        labels, _ = predict(model, grid)
        flip = grid[np.argmax(labels == 1), 0]
        assert abs(flip) <= 0.2

    def test_multiclass_supported(self):
        X, y, names = blobs(n_per=15, sep=7.0, d=3, n_classes=3, seed=9)
        for kind in CLASSICAL_KINDS:
            model = fit(kind, X, y, names, epochs=300)
            labels, _ = predict(model, X)
            assert np.mean(labels == y) >= 0.9, kind

    def test_single_class_rejected(self):
        X = np.zeros((10, 2))
        y = np.zeros(10, dtype=int)
        with pytest.raises(ClassifierError, match="single class"):
            fit(ClassifierKind.DECISION_TREE, X, y, CLASSES)

    def test_logreg_loss_decreases(self):
        X, y, names = blobs(seed=11)
        model = fit(ClassifierKind.LOGISTIC_REGRESSION, X, y, names, epochs=100)
        curve = model.params["loss_curve"]
        assert curve[-1] < curve[0]

    def test_mlp_loss_decreases(self):
        X, y, names = blobs(seed=12)
        model = fit(ClassifierKind.MLP, X, y, names, epochs=100)
        curve = model.params["loss_curve"]
        assert curve[-1] < curve[0]
        assert all(b < a for a, b in zip(curve, curve[1:]))


class TestPredictContract:
    def test_probabilistic_scores_sum_to_one(self):
        X, y, names = blobs(seed=13)
        for kind in (
            ClassifierKind.LOGISTIC_REGRESSION,
            ClassifierKind.GAUSSIAN_NB,
            ClassifierKind.MLP,
            ClassifierKind.GRADIENT_BOOSTING,
            ClassifierKind.RANDOM_FOREST,
            ClassifierKind.KNN,
        ):
            model = fit(kind, X, y, names)
            _, scores = predict(model, X)
            assert np.allclose(scores.sum(axis=1), 1.0, atol=1e-12), kind

    def test_dimension_mismatch_rejected(self):
        X, y, names = blobs(seed=14)
        model = fit(ClassifierKind.DECISION_TREE, X, y, names)
        with pytest.raises(ClassifierError, match="features"):
            predict(model, np.zeros((1, 5)))

    def test_deterministic_across_runs(self):
        X, y, names = blobs(n_per=25, sep=2.0, seed=15)
        for kind in list(ClassifierKind):
            m1 = fit(kind, X, y, names, seed=42)
            m2 = fit(kind, X, y, names, seed=42)
            assert m1.to_json() == m2.to_json(), kind

    def test_seed_changes_stochastic_models(self):
        X, y, names = blobs(n_per=25, sep=1.0, seed=16)
        m1 = fit(ClassifierKind.RANDOM_FOREST, X, y, names, seed=1)
        m2 = fit(ClassifierKind.RANDOM_FOREST, X, y, names, seed=2)
        assert m1.to_json() != m2.to_json()

    def test_serialization_round_trip_predicts_identically(self):
        X, y, names = blobs(n_per=20, sep=3.0, seed=17)
        rng = derive(18, "probe")
        probes = rng.standard_normal((100, X.shape[1])) * 3
        for kind in list(ClassifierKind):
            model = fit(kind, X, y, names, epochs=50)
            clone = TrainedModel.from_json(model.to_json())
            l1, s1 = predict(model, probes)
            l2, s2 = predict(clone, probes)
            assert np.array_equal(l1, l2), kind
            assert np.array_equal(s1, s2), kind

    def test_knn_vote_tie_breaks_to_lower_class(self):
        # two classes at equal distance from the probe, k=2
        X = np.array([[-1.0, 0.0], [1.0, 0.0]])
        y = np.array([1, 0])
        model = fit(ClassifierKind.KNN, X, y, CLASSES, k=2)
        labels, _ = predict(model, np.array([[0.0, 0.0]]))
        assert labels[0] == 0
