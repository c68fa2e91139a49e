import numpy as np
import pytest

from gaitway.ml.reducers import (
    ReducerError,
    ReducerSpec,
    lda_fit,
    lda_transform,
    pca_fit,
    pca_transform,
)
from gaitway.rng import derive


class TestPCA:
    def test_planar_data_reconstructs_with_two_components(self):
        rng = derive(0, "pca-planar")
        basis = np.linalg.qr(rng.standard_normal((5, 2)))[0]  # 2-D plane in 5-D
        Z = rng.standard_normal((40, 2)) * [3.0, 1.5]
        X = Z @ basis.T + rng.uniform(-1, 1, 5)
        red = pca_fit(X, 2)
        X_hat = red.inverse_transform(red.transform(X))
        assert np.sqrt(np.mean((X - X_hat) ** 2)) < 1e-9

    def test_mean_row_maps_to_zero(self):
        rng = derive(1, "pca-mean")
        X = rng.standard_normal((30, 4))
        red = pca_fit(X, 2)
        z = pca_transform(red, X.mean(axis=0)[None, :])
        assert np.allclose(z, 0.0, atol=1e-12)

    def test_components_orthonormal(self):
        rng = derive(2, "pca-ortho")
        X = rng.standard_normal((50, 8))
        red = pca_fit(X, 5)
        gram = red.components.T @ red.components
        assert np.allclose(gram, np.eye(5), atol=1e-9)

    def test_explained_variance_non_increasing(self):
        rng = derive(3, "pca-var")
        X = rng.standard_normal((60, 6)) * np.array([5, 4, 3, 2, 1, 0.5])
        red = pca_fit(X, 6 - 1)
        assert np.all(np.diff(red.explained_variance) <= 1e-12)

    def test_sign_convention_deterministic(self):
        rng = derive(4, "pca-sign")
        X = rng.standard_normal((40, 5))
        a, b = pca_fit(X, 3), pca_fit(X.copy(), 3)
        assert np.array_equal(a.components, b.components)
        for j in range(3):
            k = np.argmax(np.abs(a.components[:, j]))
            assert a.components[k, j] > 0

    def test_n_components_bounds(self):
        rng = derive(5, "pca-bounds")
        X = rng.standard_normal((10, 4))
        with pytest.raises(ReducerError):
            pca_fit(X, 0)
        with pytest.raises(ReducerError):
            pca_fit(X, 5)

    def test_round_trip_serialization(self):
        from gaitway.ml.reducers import PCAReducer

        rng = derive(6, "pca-serde")
        X = rng.standard_normal((20, 4))
        red = pca_fit(X, 2)
        clone = PCAReducer.from_dict(red.to_dict())
        assert np.array_equal(clone.transform(X), red.transform(X))


class TestLDA:
    def _blobs(self, n_classes=2, n_per=30, sep=8.0, d=5, seed=0):
        rng = derive(seed, "lda-blobs")
        X, y = [], []
        for c in range(n_classes):
            center = np.zeros(d)
            center[0] = c * sep
            X.append(rng.standard_normal((n_per, d)) + center)
            y += [c] * n_per
        return np.vstack(X), np.array(y)

    def test_binary_allows_single_component_only(self):
        X, y = self._blobs()
        red = lda_fit(X, y, 1)
        assert red.n_components == 1
        with pytest.raises(ReducerError):
            lda_fit(X, y, 2)

    def test_separated_blobs_project_far_apart(self):
        X, y = self._blobs(sep=8.0)
        red = lda_fit(X, y, 1)
        z = lda_transform(red, X).ravel()
        m0, m1 = z[y == 0].mean(), z[y == 1].mean()
        pooled = np.sqrt((z[y == 0].var() + z[y == 1].var()) / 2)
        assert abs(m0 - m1) > 5 * pooled

    def test_three_classes_two_components(self):
        X, y = self._blobs(n_classes=3)
        red = lda_fit(X, y, 2)
        assert red.transform(X).shape == (len(y), 2)

    def test_single_class_rejected(self):
        rng = derive(7, "lda-single")
        X = rng.standard_normal((20, 3))
        with pytest.raises(ReducerError):
            lda_fit(X, np.zeros(20, dtype=int), 1)

    def test_degenerate_within_scatter_still_solvable(self):
        # one point per class: Sw is exactly zero
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1])
        red = lda_fit(X, y, 1)
        z = red.transform(X)
        assert np.isfinite(z).all()


class TestReducerSpec:
    def test_unknown_kind(self):
        with pytest.raises(ReducerError):
            ReducerSpec("tsne", 2)

    def test_fit_dispatch(self):
        rng = derive(8, "spec")
        X = rng.standard_normal((20, 4))
        y = np.array([0, 1] * 10)
        assert ReducerSpec("pca", 2).fit(X).n_components == 2
        assert ReducerSpec("lda", 1).fit(X, y).n_components == 1
