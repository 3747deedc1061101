import csv
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from maskfaith.drift import (DriftError, EmbeddingSet, centroid, cos_sim, curve_from_sets, drift_curve,
                             masked_embedding_sets, mean_feature_std, pca_projection, read_drift_csv,
                             write_drift_csv, write_projection_csv, _mask_count)

finite = st.floats(-10, 10, allow_nan=False)


def test_centroid_examples():
    np.testing.assert_array_equal(centroid([[0, 2], [2, 0]]), [1, 1])
    np.testing.assert_array_equal(centroid([[3, -1]]), [3, -1])
    same = [[1.5, 2.0]] * 4
    np.testing.assert_array_equal(centroid(same), [1.5, 2.0])
    assert mean_feature_std(same) == 0.0
    with pytest.raises(DriftError):
        centroid(np.zeros((0, 3)))


def test_cos_sim_examples():
    assert cos_sim([1, 2], [1, 2]) == 1.0
    assert cos_sim([1, 0], [0, 1]) == 0.0
    assert cos_sim([1, 1], [1, 0]) == pytest.approx(0.70710678, abs=1e-8)
    with pytest.raises(DriftError):
        cos_sim([0, 0], [1, 0])


@settings(max_examples=80, deadline=None)
@given(arrays(float, 4, elements=finite), st.floats(1e-3, 1e3))
def test_cos_sim_scale_invariance(a, c):
    if np.linalg.norm(a) < 1e-3:
        return
    assert abs(cos_sim(a, c * a) - 1.0) <= 1e-12


def test_mean_feature_std_examples():
    assert mean_feature_std([[0, 0], [2, 2]]) == 1.0
    assert mean_feature_std([[1, 2], [1, 2]]) == 0.0
    v = np.array([[0.1, 2.0], [1.0, -1.0], [3.0, 0.5]])
    assert mean_feature_std(3 * v) == pytest.approx(3 * mean_feature_std(v), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (5, 3), elements=finite), st.permutations(range(5)))
def test_permutation_invariance(v, perm):
    np.testing.assert_allclose(centroid(v[list(perm)]), centroid(v), atol=1e-12)
    assert mean_feature_std(v[list(perm)]) == pytest.approx(mean_feature_std(v), abs=1e-12)


def test_mask_count_rounding():
    assert _mask_count(0.3, 10) == 3
    assert _mask_count(0.1, 7) == 1
    assert _mask_count(0.5, 5) == 3
    assert _mask_count(0.0, 5) == 0


def test_fraction_zero_only(sentiment):
    curve = drift_curve(sentiment["model"], sentiment["holdout"], fractions=[0])
    assert curve.centroid_cos == [1.0] and curve.delta_sigma == [0.0]


def test_fraction_zero_reproduces_clean_statistics(sentiment):
    m, holdout = sentiment["model"], sentiment["holdout"]
    sets = masked_embedding_sets(m, holdout, fractions=[0, 0.5])
    clean = np.vstack([m.embed(s) for s in holdout])
    np.testing.assert_array_equal(sets[0].vectors, clean)
    curve = curve_from_sets(sets)
    mu = clean.mean(axis=0)
    assert curve.mean_feature_std[0] == mean_feature_std(clean)
    assert curve.mean_cos_to_clean_centroid[0] == pytest.approx(np.mean([cos_sim(v, mu) for v in clean]), abs=1e-15)


def test_masking_homogenizes_embeddings(sentiment, toxicity):
    for fixture in (sentiment, toxicity):
        data = fixture.get("holdout") or fixture["data"]
        curve = drift_curve(fixture["model"], data, fractions=[0, 0.5])
        print(data.name, "delta_sigma", curve.delta_sigma[-1])
        assert curve.delta_sigma[-1] < 0


def test_fractions_validated(sentiment):
    for bad in ([0.1, 0.2], [0, 0.3, 0.2], [0, 1.5], []):
        with pytest.raises(DriftError):
            masked_embedding_sets(sentiment["model"], sentiment["holdout"], fractions=bad)


def test_pca_preserves_planar_distances():
    rng = np.random.default_rng(0)
    basis, _ = np.linalg.qr(rng.normal(size=(6, 2)))
    coords = rng.normal(size=(20, 2)) * [3.0, 1.0]
    pts = coords @ basis.T + rng.normal(size=6)
    proj = pca_projection([EmbeddingSet(pts[:12]), EmbeddingSet(pts[12:])])
    q = np.vstack(proj.points)
    for i, j in itertools.combinations(range(20), 2):
        assert abs(np.linalg.norm(q[i] - q[j]) - np.linalg.norm(pts[i] - pts[j])) <= 1e-8


def test_pca_deterministic_and_top_variance():
    rng = np.random.default_rng(1)
    pts = rng.normal(size=(30, 5)) * [4, 3, 2, 1, 0.5]
    a = pca_projection([EmbeddingSet(pts)])
    b = pca_projection([EmbeddingSet(pts.copy())])
    np.testing.assert_array_equal(a.points[0], b.points[0])
    full = np.sort(np.linalg.eigvalsh(np.cov(pts.T)))[::-1]
    top2 = a.explained_variance.sum()
    for i, j in itertools.combinations(range(5), 2):
        assert top2 >= full[i] + full[j] - 1e-10
    for c in a.components:
        assert c[np.argmax(np.abs(c))] > 0


def test_pca_rejects_degenerate():
    with pytest.raises(DriftError):
        pca_projection([EmbeddingSet([[1.0, 2.0, 3.0]] * 4)])
    line = np.outer(np.arange(5.0), [1.0, 2.0, 0.5])
    with pytest.raises(DriftError):
        pca_projection([EmbeddingSet(line)])


def test_csv_roundtrip(tmp_path, sentiment):
    sets = masked_embedding_sets(sentiment["model"], sentiment["holdout"], fractions=[0, 0.2, 0.4])
    curve = curve_from_sets(sets)
    write_drift_csv(tmp_path / "d.csv", curve)
    back = read_drift_csv(tmp_path / "d.csv")
    assert back.mean_cos_to_clean_centroid == curve.mean_cos_to_clean_centroid
    assert back.delta_sigma == curve.delta_sigma
    proj = pca_projection([sets[0], sets[-1]])
    write_projection_csv(tmp_path / "p.csv", [sets[0], sets[-1]], proj, ["clean", "masked"])
    rows = list(csv.DictReader(open(tmp_path / "p.csv")))
    assert len(rows) == 2 * len(sentiment["holdout"]) and rows[0]["set_name"] == "clean"
