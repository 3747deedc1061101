"""Iterative masking and the faithfulness measures built on it.

Fidelity follows the mask-until-flip procedure: tokens are replaced by
``[UNK]`` (or deleted) in descending attribution order until the predicted
class changes after ``C`` steps; a sample scores ``f = C / N`` with ``N`` its
maskable-token count, and samples that never flip take the maximum penalty
``f = 1``. Model fidelity is ``1 - mean(f)``.

AOPC averages ``f(x) - f(x_1..k)`` for ``k = 1..L`` over the dataset and
divides by ``L + 1``, where ``f`` is the probability of the originally
predicted class.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .attribution import DEFAULT_STEPS, AttributionSource, AttributionVector, attribute, rank_tokens
from .corpus import UNK_ID, Dataset, TokenSequence
from .model import ClassifierModel, predicted_class

MODES = ("unk_replace", "delete")


class MaskingError(ValueError):
    pass


@dataclass(frozen=True)
class MaskStep:
    masked_index: int
    probabilities: tuple[float, ...]
    predicted_class: int


@dataclass
class MaskingTrace:
    sample_id: int
    steps: list[MaskStep]
    initial_probabilities: tuple[float, ...]
    initial_class: int
    flip_step: int | None
    maskable_count: int
    mode: str

    @property
    def flipped(self) -> bool:
        return self.flip_step is not None

    @property
    def f(self) -> float:
        """Fraction of maskable tokens masked at the flip; 1 if it never flips."""
        c = self.maskable_count if self.flip_step is None else self.flip_step
        return c / self.maskable_count

    @property
    def masked_indices(self) -> list[int]:
        return [s.masked_index for s in self.steps]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["steps"] = [asdict(s) for s in self.steps]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MaskingTrace":
        steps = [MaskStep(s["masked_index"], tuple(s["probabilities"]), s["predicted_class"])
                 for s in d["steps"]]
        return cls(d["sample_id"], steps, tuple(d["initial_probabilities"]), d["initial_class"],
                   d["flip_step"], d["maskable_count"], d["mode"])


@dataclass
class FidelityReport:
    fidelity: float
    per_sample_f: list[float]
    non_perturbation_frequency: float
    mean_masked_fraction: float
    K: int
    traces: list[MaskingTrace] = field(default_factory=list, repr=False)

    @classmethod
    def from_traces(cls, traces: Sequence[MaskingTrace]) -> "FidelityReport":
        if not traces:
            raise MaskingError("empty dataset")
        f = [t.f for t in traces]
        mean_f = math.fsum(f) / len(f)
        npf = sum(not t.flipped for t in traces) / len(traces)
        fid = 1.0 - mean_f
        return cls(fid, f, npf, 1.0 - fid, len(traces), list(traces))

    def summary(self) -> dict:
        return {"fidelity": self.fidelity, "non_perturbation_frequency": self.non_perturbation_frequency,
                "mean_masked_fraction": self.mean_masked_fraction, "K": self.K}


@dataclass
class PerturbationCurve:
    sample_id: int
    values: list[float]
    L: int
    clamped: bool = False

    @property
    def area(self) -> float:
        return math.fsum(self.values[1:]) / (self.L + 1)


def _samples(data) -> list[TokenSequence]:
    samples = list(data.samples if isinstance(data, Dataset) else data)
    if not samples:
        raise MaskingError("empty dataset")
    return samples


def masked_sequence(sample: TokenSequence, indices: Iterable[int], mode: str = "unk_replace") -> TokenSequence:
    """``sample`` with the given original positions replaced by ``[UNK]`` or deleted."""
    idx = set(indices)
    if mode == "unk_replace":
        ids = tuple(UNK_ID if i in idx else t for i, t in enumerate(sample.ids))
        return TokenSequence(ids, sample.raw, sample.label, sample.maskable)
    if mode == "delete":
        keep = [i for i in range(len(sample)) if i not in idx]
        return TokenSequence(tuple(sample.ids[i] for i in keep), tuple(sample.raw[i] for i in keep),
                             sample.label, tuple(sample.maskable[i] for i in keep))
    raise MaskingError(f"unknown mode {mode!r}; expected one of {MODES}")


def iterative_mask(model: ClassifierModel, sample: TokenSequence,
                   attr_method: AttributionSource = "integrated_gradients",
                   mode: str = "unk_replace", recompute: bool = False, *,
                   steps: int = DEFAULT_STEPS, order: Sequence[int] | None = None,
                   max_steps: int | None = None, sample_id: int = 0) -> MaskingTrace:
    """Mask tokens one at a time in attribution order until the predicted class changes.

    Parameters
    ----------
    attr_method : method name, callable or precomputed :class:`AttributionVector`.
        Attributions target the initially predicted class.
    recompute : if True, attributions are recomputed on the current masked
        sequence before each step instead of following one initial ranking.
    order : explicit masking order over original positions (overrides ranking).
    max_steps : stop after this many masks even without a flip.

    In ``delete`` mode a deletion that would empty the sequence is not
    evaluated; the trace ends at the last non-empty evaluation.
    """
    if mode not in MODES:
        raise MaskingError(f"unknown mode {mode!r}; expected one of {MODES}")
    n_maskable = sample.maskable_count
    if n_maskable == 0:
        raise MaskingError("sample has no maskable tokens")
    p0 = np.asarray(model.predict(sample), dtype=float)
    y0 = predicted_class(p0)
    if order is None and not recompute:
        attr = attribute(model, sample, attr_method, y0, steps)
        order = rank_tokens(attr, sample.maskable)
    elif order is not None:
        order = list(order)
        if sorted(order) != [i for i, m in enumerate(sample.maskable) if m]:
            raise MaskingError("order must be a permutation of the maskable positions")
        recompute = False
    limit = n_maskable if max_steps is None else min(n_maskable, max_steps)

    masked: list[int] = []
    trace_steps: list[MaskStep] = []
    flip = None
    for step in range(limit):
        if mode == "delete" and len(masked) + 1 >= len(sample):
            break
        if recompute:
            current = masked_sequence(sample, masked, mode)
            done = set(masked)
            if mode == "unk_replace":
                positions = list(range(len(sample)))
            else:
                positions = [i for i in range(len(sample)) if i not in done]
            flags = [sample.maskable[p] and p not in done for p in positions]
            current = current.with_maskable(flags)
            attr = attribute(model, current, attr_method, y0, steps)
            index = positions[rank_tokens(attr, flags)[0]]
        else:
            index = order[step]
        masked.append(index)
        probs = np.asarray(model.predict(masked_sequence(sample, masked, mode)), dtype=float)
        cls = predicted_class(probs)
        trace_steps.append(MaskStep(int(index), tuple(float(p) for p in probs), cls))
        if cls != y0:
            flip = step + 1
            break
    return MaskingTrace(sample_id, trace_steps, tuple(float(p) for p in p0), y0, flip, n_maskable, mode)


def fidelity(model: ClassifierModel, data, attr_method: AttributionSource = "integrated_gradients",
             mode: str = "unk_replace", recompute: bool = False, *, steps: int = DEFAULT_STEPS,
             sample_ids: Sequence[int] | None = None) -> FidelityReport:
    samples = _samples(data)
    ids = list(range(len(samples))) if sample_ids is None else list(sample_ids)
    traces = [iterative_mask(model, s, attr_method, mode, recompute, steps=steps, sample_id=i)
              for i, s in zip(ids, samples)]
    return FidelityReport.from_traces(traces)


def random_order(rng: np.random.Generator, sample: TokenSequence) -> list[int]:
    idx = np.array([i for i, m in enumerate(sample.maskable) if m])
    return [int(i) for i in idx[rng.permutation(len(idx))]]


def random_baseline_fidelity(model: ClassifierModel, data, seed: int, mode: str = "unk_replace", *,
                             sample_ids: Sequence[int] | None = None) -> FidelityReport:
    """Fidelity with a uniformly random masking order per sample."""
    samples = _samples(data)
    ids = list(range(len(samples))) if sample_ids is None else list(sample_ids)
    rng = np.random.default_rng(seed)
    traces = [iterative_mask(model, s, mode=mode, order=random_order(rng, s), sample_id=i)
              for i, s in zip(ids, samples)]
    return FidelityReport.from_traces(traces)


def perturbation_curves(model: ClassifierModel, data, attr_method: AttributionSource = "integrated_gradients",
                        L: int = 5, *, steps: int = DEFAULT_STEPS, random_seed: int | None = None,
                        sample_ids: Sequence[int] | None = None) -> list[PerturbationCurve]:
    """Per-sample drops ``f(x) - f(x_1..k)`` for ``k = 0..L`` under UNK replacement.

    ``L`` is clamped per sample to its maskable count (``clamped`` records it).
    With ``random_seed`` set, a uniformly random order replaces the attribution ranking.
    """
    if L < 1:
        raise MaskingError(f"L must be >= 1, got {L}")
    samples = _samples(data)
    ids = list(range(len(samples))) if sample_ids is None else list(sample_ids)
    rng = None if random_seed is None else np.random.default_rng(random_seed)
    curves = []
    for sid, s in zip(ids, samples):
        if s.maskable_count == 0:
            raise MaskingError(f"sample {sid} has no maskable tokens")
        probs = model.predict(s)
        y0 = predicted_class(probs)
        if rng is None:
            order = rank_tokens(attribute(model, s, attr_method, y0, steps), s.maskable)
        else:
            order = random_order(rng, s)
        length = min(L, len(order))
        values = [0.0]
        for k in range(1, length + 1):
            values.append(float(probs[y0] - model.predict(masked_sequence(s, order[:k]))[y0]))
        curves.append(PerturbationCurve(sid, values, length, length < L))
    return curves


def aopc_from_curves(curves: Sequence[PerturbationCurve]) -> float:
    if not curves:
        raise MaskingError("empty dataset")
    return math.fsum(c.area for c in curves) / len(curves)


def aopc(model: ClassifierModel, data, attr_method: AttributionSource = "integrated_gradients",
         L: int = 5, *, steps: int = DEFAULT_STEPS, random_seed: int | None = None) -> float:
    return aopc_from_curves(perturbation_curves(model, data, attr_method, L, steps=steps,
                                                random_seed=random_seed))


# -- serialization -----------------------------------------------------------

def write_traces_jsonl(path, traces: Iterable[MaskingTrace]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(json.dumps(t.to_dict()) + "\n")


def read_traces_jsonl(path) -> list[MaskingTrace]:
    with open(path, encoding="utf-8") as fh:
        return [MaskingTrace.from_dict(json.loads(line)) for line in fh if line.strip()]


def write_report(report: FidelityReport, json_path, csv_path) -> None:
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.summary(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "f", "flip_step", "maskable_count"])
        for t in report.traces:
            w.writerow([t.sample_id, repr(t.f), "" if t.flip_step is None else t.flip_step,
                        t.maskable_count])


def read_per_sample_f(csv_path) -> list[float]:
    with open(csv_path, newline="", encoding="utf-8") as fh:
        return [float(row["f"]) for row in csv.DictReader(fh)]


def write_curves_csv(path, curves: Iterable[PerturbationCurve]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "k", "drop", "L", "clamped"])
        for c in curves:
            for k, v in enumerate(c.values):
                w.writerow([c.sample_id, k, repr(v), c.L, int(c.clamped)])
