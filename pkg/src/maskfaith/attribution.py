"""Token attributions: integrated gradients from a zero baseline, and UNK occlusion."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .corpus import UNK_ID, TokenSequence
from .model import ClassifierModel, ModelError, grad_wrt_inputs, input_embeddings, predicted_class

DEFAULT_STEPS = 30
METHODS = ("integrated_gradients", "occlusion")


class AttributionError(ValueError):
    pass


@dataclass(frozen=True)
class AttributionVector:
    scores: np.ndarray
    target_class: int
    method: str
    steps: int | None = None
    completeness_gap: float | None = None

    def __len__(self):
        return len(self.scores)


# An attribution source is a method name, a callable (model, sample, target) -> AttributionVector,
# or a precomputed AttributionVector (fixed ranking).
AttributionSource = Union[str, Callable, AttributionVector]


def integrated_gradients(model: ClassifierModel, sample: TokenSequence, target_class: int,
                         steps: int = DEFAULT_STEPS) -> AttributionVector:
    """Right-endpoint Riemann approximation of integrated gradients.

    The path runs from the all-zero embedding matrix to the sample's input
    embeddings; token scores are the signed sum over embedding dimensions.
    """
    if steps < 1:
        raise AttributionError(f"steps must be >= 1, got {steps}")
    if len(sample) == 0:
        raise AttributionError("empty input")
    x = input_embeddings(model, sample)
    total = np.zeros_like(x)
    for k in range(1, steps + 1):
        total += grad_wrt_inputs(model, (k / steps) * x, target_class)
    per_dim = x * (total / steps)
    scores = per_dim.sum(axis=1)
    if not np.all(np.isfinite(scores)):
        raise ModelError("non-finite attribution")
    delta = model.predict_embeddings(x)[target_class] - model.predict_embeddings(np.zeros_like(x))[target_class]
    gap = abs(float(scores.sum()) - float(delta))
    return AttributionVector(scores, target_class, "integrated_gradients", steps, gap)


def occlude(sample: TokenSequence, index: int) -> TokenSequence:
    ids = list(sample.ids)
    ids[index] = UNK_ID
    return TokenSequence(tuple(ids), sample.raw, sample.label, sample.maskable)


def occlusion(model: ClassifierModel, sample: TokenSequence, target_class: int) -> AttributionVector:
    base = model.predict(sample)[target_class]
    scores = np.array([base - model.predict(occlude(sample, i))[target_class]
                       for i in range(len(sample))])
    return AttributionVector(scores, target_class, "occlusion")


def attribute(model: ClassifierModel, sample: TokenSequence, source: AttributionSource = "integrated_gradients",
              target_class: int | None = None, steps: int = DEFAULT_STEPS) -> AttributionVector:
    """Dispatch on ``source``; ``target_class`` defaults to the predicted class."""
    if isinstance(source, AttributionVector):
        if len(source) != len(sample):
            raise AttributionError("precomputed attribution length does not match sample")
        return source
    if target_class is None:
        target_class = predicted_class(model.predict(sample))
    if callable(source):
        return source(model, sample, target_class)
    if source == "integrated_gradients":
        return integrated_gradients(model, sample, target_class, steps)
    if source == "occlusion":
        return occlusion(model, sample, target_class)
    raise AttributionError(f"unknown attribution method {source!r}; expected one of {METHODS}")


def rank_tokens(attr: AttributionVector | Sequence[float], maskable: Sequence[bool]) -> list[int]:
    """Maskable indices by descending score, ties to the lower index."""
    scores = attr.scores if isinstance(attr, AttributionVector) else np.asarray(attr, dtype=float)
    if len(scores) != len(maskable):
        raise AttributionError("scores and maskable lengths differ")
    idx = [i for i, m in enumerate(maskable) if m]
    if not idx:
        raise AttributionError("no maskable tokens")
    return sorted(idx, key=lambda i: (-scores[i], i))


def write_attributions_csv(path, rows) -> None:
    """``rows``: iterable of ``(sample_id, TokenSequence, AttributionVector)``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "token_index", "raw_token", "score", "method", "target_class"])
        for sample_id, sample, attr in rows:
            for i, (tok, score) in enumerate(zip(sample.raw, attr.scores)):
                w.writerow([sample_id, i, tok, repr(float(score)), attr.method, attr.target_class])
