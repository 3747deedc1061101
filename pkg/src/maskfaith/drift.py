"""Embedding drift of masked samples relative to the clean embedding distribution."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .attribution import DEFAULT_STEPS, AttributionSource, AttributionVector, attribute, rank_tokens
from .masking import masked_sequence
from .model import ClassifierModel, embed_sample, predicted_class


class DriftError(ValueError):
    pass


@dataclass
class EmbeddingSet:
    vectors: np.ndarray
    source: str = ""
    mask_fraction: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.ndim == 1 and v.size == 0:
            v = v.reshape(0, 0)
        if v.ndim != 2:
            raise DriftError("vectors must form a k x n matrix")
        self.vectors = v

    def __len__(self):
        return self.vectors.shape[0]


@dataclass
class DriftCurve:
    mask_fractions: list[float]
    mean_cos_to_clean_centroid: list[float]
    centroid_cos: list[float]
    mean_feature_std: list[float]

    @property
    def delta_mu(self) -> list[float]:
        return [1.0 - c for c in self.centroid_cos]

    @property
    def delta_sigma(self) -> list[float]:
        return [s - self.mean_feature_std[0] for s in self.mean_feature_std]


def _as_set(s) -> EmbeddingSet:
    return s if isinstance(s, EmbeddingSet) else EmbeddingSet(s)


def centroid(s) -> np.ndarray:
    s = _as_set(s)
    if len(s) == 0:
        raise DriftError("centroid of an empty set")
    return s.vectors.mean(axis=0)


def cos_sim(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aa, bb = float(a @ a), float(b @ b)
    if aa == 0.0 or bb == 0.0:
        raise DriftError("undefined cosine for a zero vector")
    # one sqrt of the product keeps cos(a, a) exactly 1 in the common cases
    return float(np.clip(a @ b / np.sqrt(aa * bb), -1.0, 1.0))


def mean_feature_std(s) -> float:
    """Population standard deviation per dimension, averaged over dimensions."""
    s = _as_set(s)
    if len(s) < 2:
        raise DriftError("mean_feature_std needs at least 2 vectors")
    return float(s.vectors.std(axis=0).mean())


def _mask_count(q: float, n: int) -> int:
    # round before ceil so 0.3 * 10 = 3.0000000000000004 masks 3, not 4
    return min(n, math.ceil(round(q * n, 9)))


def _check_fractions(fractions):
    fr = [float(q) for q in fractions]
    if not fr or fr[0] != 0.0:
        raise DriftError("fractions must start at 0")
    if any(b <= a for a, b in zip(fr, fr[1:])) or fr[-1] > 1.0:
        raise DriftError("fractions must be strictly increasing and <= 1")
    return fr


def masked_embedding_sets(model: ClassifierModel, data, attr_method: AttributionSource = "integrated_gradients",
                          fractions: Sequence[float] = (0.0, 0.5), *, steps: int = DEFAULT_STEPS,
                          attributions: Sequence[AttributionVector] | None = None,
                          source: str = "") -> list[EmbeddingSet]:
    """One embedding set per fraction; each sample has its top ``ceil(q * N)`` tokens UNK-masked.

    ``attributions`` supplies precomputed per-sample attributions in place of ``attr_method``.
    """
    fr = _check_fractions(fractions)
    samples = list(getattr(data, "samples", data))
    if not samples:
        raise DriftError("empty dataset")
    source = source or getattr(data, "name", "")
    if attributions is not None and len(attributions) != len(samples):
        raise DriftError("one attribution per sample required")
    orders = []
    for i, s in enumerate(samples):
        if attributions is not None:
            attr = attribute(model, s, attributions[i])
        else:
            attr = attribute(model, s, attr_method, predicted_class(model.predict(s)), steps)
        orders.append(rank_tokens(attr, s.maskable))
    sets = []
    for q in fr:
        vecs = [embed_sample(model, masked_sequence(s, o[:_mask_count(q, len(o))]))
                for s, o in zip(samples, orders)]
        sets.append(EmbeddingSet(np.vstack(vecs), source, q))
    return sets


def curve_from_sets(sets: Sequence[EmbeddingSet]) -> DriftCurve:
    clean_mu = centroid(sets[0])
    mean_cos, cent_cos, stds = [], [], []
    for s in sets:
        mean_cos.append(math.fsum(cos_sim(v, clean_mu) for v in s.vectors) / len(s))
        cent_cos.append(cos_sim(centroid(s), clean_mu))
        stds.append(mean_feature_std(s))
    cent_cos[0] = 1.0
    return DriftCurve([s.mask_fraction for s in sets], mean_cos, cent_cos, stds)


def drift_curve(model: ClassifierModel, data, attr_method: AttributionSource = "integrated_gradients",
                fractions: Sequence[float] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5), *,
                steps: int = DEFAULT_STEPS) -> DriftCurve:
    return curve_from_sets(masked_embedding_sets(model, data, attr_method, fractions, steps=steps))


@dataclass
class Projection:
    points: list[np.ndarray]
    components: np.ndarray
    explained_variance: np.ndarray
    mean: np.ndarray


def pca_projection(sets: Sequence[EmbeddingSet], dims: int = 2, *, rtol: float = 1e-10) -> Projection:
    """Project every set onto the top principal components of their union.

    Components come from an eigendecomposition of the covariance of the
    mean-centered union; each component's sign is fixed so that its
    largest-magnitude loading is positive.
    """
    sets = [_as_set(s) for s in sets]
    union = np.vstack([s.vectors for s in sets])
    if union.shape[0] < 3:
        raise DriftError("PCA needs at least 3 vectors")
    mean = union.mean(axis=0)
    centered = union - mean
    cov = centered.T @ centered / (union.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    tol = rtol * max(evals[0], 0.0)
    rank = int(np.sum(evals > tol)) if evals[0] > 0 else 0
    if rank < dims:
        raise DriftError(f"degenerate covariance: rank {rank} < {dims}")
    comps = evecs[:, :dims].T.copy()
    for c in comps:
        if c[np.argmax(np.abs(c))] < 0:
            c *= -1.0
    points = [(s.vectors - mean) @ comps.T for s in sets]
    return Projection(points, comps, evals[:dims].copy(), mean)


def write_drift_csv(path, curve: DriftCurve) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fraction", "mean_cos", "centroid_cos", "mean_feature_std", "delta_mu", "delta_sigma"])
        for row in zip(curve.mask_fractions, curve.mean_cos_to_clean_centroid, curve.centroid_cos,
                       curve.mean_feature_std, curve.delta_mu, curve.delta_sigma):
            w.writerow([repr(float(v)) for v in row])


def read_drift_csv(path) -> DriftCurve:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    col = lambda k: [float(r[k]) for r in rows]
    return DriftCurve(col("fraction"), col("mean_cos"), col("centroid_cos"), col("mean_feature_std"))


def write_projection_csv(path, sets: Sequence[EmbeddingSet], projection: Projection, names=None) -> None:
    names = names or [s.source for s in sets]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["set_name", "mask_fraction", "sample_id", "pc1", "pc2"])
        for name, s, pts in zip(names, sets, projection.points):
            for i, p in enumerate(pts):
                w.writerow([name, repr(float(s.mask_fraction)), i, repr(float(p[0])), repr(float(p[1]))])
