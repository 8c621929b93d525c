import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pidkd.rep_pipeline import (RepDump, discretize, kmeans_assign, kmeans_fit, load_matrix_csv, pca_fit,
                                pca_transform, pipeline_pid, save_matrix_csv)

sk_dec = pytest.importorskip("sklearn.decomposition")
sk_cl = pytest.importorskip("sklearn.cluster")


def test_pca_matches_sklearn(rng):
    x = rng.normal(size=(300, 8)) @ rng.normal(size=(8, 8))
    ours = pca_fit(x, 4)
    ref = sk_dec.PCA(4, svd_solver="full").fit(x)
    assert np.allclose(ours.explained_variance, ref.explained_variance_, rtol=1e-8)
    # same subspace up to sign
    assert np.allclose(np.abs(ours.components @ ref.components_.T), np.eye(4), atol=1e-6)


def test_kmeans_inertia_comparable_to_sklearn(rng):
    centers = rng.normal(size=(5, 3)) * 6
    x = np.concatenate([c + rng.normal(size=(80, 3)) for c in centers])
    ours = kmeans_fit(x, 5, seed=0)
    ref = sk_cl.KMeans(5, n_init=5, random_state=0).fit(x)
    assert ours.inertia <= ref.inertia_ * 1.01


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_kmeans_properties(seed, k):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(60, 3))
    m = kmeans_fit(x, k, seed=seed)
    lab = kmeans_assign(m, x)
    assert set(lab) <= set(range(m.k))
    # every centroid is the mean of its cluster (Lloyd fixed point)
    for j in range(m.k):
        if np.any(lab == j):
            assert np.allclose(m.centroids[j], x[lab == j].mean(axis=0), atol=1e-8)
    assert m.inertia == pytest.approx(((x - m.centroids[lab]) ** 2).sum(), rel=1e-9)


def test_kmeans_deterministic(rng):
    x = rng.normal(size=(100, 4))
    a, b = kmeans_fit(x, 4, seed=7), kmeans_fit(x, 4, seed=7)
    assert np.array_equal(a.centroids, b.centroids)


def test_kmeans_few_distinct_points_warns():
    x = np.repeat(np.eye(2), 10, axis=0)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        m = kmeans_fit(x, 5)
    assert m.k == 2 and w


def test_pca_projection_orthonormal(rng):
    x = rng.normal(size=(50, 6))
    m = pca_fit(x, 10)  # capped at the feature count
    assert m.components.shape == (6, 6)
    assert np.allclose(m.components @ m.components.T, np.eye(6), atol=1e-10)
    assert pca_transform(m, x).shape == (50, 6)


def test_discretize_range(rng):
    lab, _, km = discretize(rng.normal(size=(200, 5)), 3, 4)
    assert lab.min() >= 0 and lab.max() < km.k


def test_pipeline_copy(rng):
    y = rng.integers(0, 4, 800)
    t = np.eye(4)[y] + 0.01 * rng.normal(size=(800, 4))
    res = pipeline_pid(RepDump(t, t.copy(), y), n_components=3, k=4)
    assert res.atoms.red == pytest.approx(2.0, abs=0.02)
    assert res.k_t == 4


def test_low_sample_warning(rng):
    y = rng.integers(0, 2, 50)
    res = pipeline_pid(RepDump(rng.normal(size=(50, 3)), rng.normal(size=(50, 3)), y), 2, k=4)
    assert any("low sample" in w for w in res.warnings)


def test_row_mismatch():
    with pytest.raises(ValueError):
        RepDump(np.zeros((3, 2)), np.zeros((4, 2)), np.zeros(3))


def test_matrix_csv_roundtrip(tmp_path, rng):
    x = rng.normal(size=(10, 3))
    save_matrix_csv(tmp_path / "x.csv", x)
    assert np.allclose(load_matrix_csv(tmp_path / "x.csv"), x, atol=1e-9)
