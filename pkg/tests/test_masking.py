import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maskfaith.attribution import AttributionVector, integrated_gradients, rank_tokens
from maskfaith.corpus import UNK_ID, TokenSequence
from maskfaith.masking import (FidelityReport, MaskingError, MaskingTrace, aopc, aopc_from_curves, fidelity,
                               iterative_mask, masked_sequence, perturbation_curves, random_baseline_fidelity,
                               read_per_sample_f, read_traces_jsonl, write_report, write_traces_jsonl)
from maskfaith.model import ClassifierModel, ReplayModel, predicted_class

from oracles import random_model

TRACE_WORDS = ("the", "beautiful", "images", "and", "solemn", "words")
# beautiful, images, solemn, the, and; "words" is never masked
TRACE_SCORES = np.array([0.2, 0.9, 0.7, 0.1, 0.5, 0.0])
TRACE_MASK_POS = [0.991, 0.976, 0.964, 0.717, 0.860, 0.948]
TRACE_DELETE_POS = [0.991, 0.986, 0.964, 0.880, 0.942, 0.946]


def published_sample():
    return TokenSequence(tuple(range(1, 7)), TRACE_WORDS, 1, (True,) * 5 + (False,))


def replay(pos):
    return ReplayModel([[round(1 - p, 6), p] for p in pos])


class FlipOnUnk(ClassifierModel):
    """Class 1 unless some token is UNK."""

    num_classes = 2
    embedding_dim = 2

    def __init__(self):
        self.calls = 0

    def predict(self, sample):
        self.calls += 1
        return np.array([0.8, 0.2]) if UNK_ID in sample.ids else np.array([0.2, 0.8])


class Constant(ClassifierModel):
    num_classes = 2
    embedding_dim = 2

    def predict(self, sample):
        return np.array([0.3, 0.7])


def fixed_attr(scores, target=1):
    return AttributionVector(np.asarray(scores, dtype=float), target, "occlusion")


def test_published_trace_replay_unk():
    s = published_sample()
    model = replay(TRACE_MASK_POS)
    t = iterative_mask(model, s, fixed_attr(TRACE_SCORES))
    assert t.flip_step is None and not t.flipped
    assert len(t.steps) == 5 and t.maskable_count == 5
    assert model.cursor == 6
    assert t.masked_indices == [1, 2, 4, 0, 3]
    assert [step.probabilities[1] for step in t.steps] == TRACE_MASK_POS[1:]
    assert t.f == 1.0
    rep = FidelityReport.from_traces([t])
    assert rep.non_perturbation_frequency == 1.0 and rep.fidelity == 0.0


def test_published_trace_replay_delete():
    s = published_sample()
    t = iterative_mask(replay(TRACE_DELETE_POS), s, fixed_attr(TRACE_SCORES), mode="delete")
    assert t.flip_step is None and len(t.steps) == 5
    remaining = masked_sequence(s, t.masked_indices, "delete")
    assert remaining.raw == ("words",)


def test_forced_flip_at_step_one():
    s = TokenSequence((1, 2, 3, 4), ("a", "b", "c", "d"), 1)
    t = iterative_mask(FlipOnUnk(), s, "occlusion")
    assert t.flip_step == 1 and len(t.steps) == 1 and t.f == 0.25


def test_masking_order_follows_initial_ranking(sentiment):
    m = sentiment["model"]
    for s in sentiment["holdout"].samples[:10]:
        y = predicted_class(m.predict(s))
        expected = rank_tokens(integrated_gradients(m, s, y), s.maskable)
        t = iterative_mask(m, s)
        assert t.masked_indices == expected[:len(t.steps)]


def test_recompute_runs_and_respects_maskable(sentiment):
    m = sentiment["model"]
    for s in sentiment["holdout"].samples[:5]:
        s = s.with_maskable([i % 2 == 0 for i in range(len(s))])
        t = iterative_mask(m, s, recompute=True)
        assert all(i % 2 == 0 for i in t.masked_indices)
        assert len(set(t.masked_indices)) == len(t.masked_indices)


def test_delete_shrinks_by_one_and_unk_keeps_length():
    s = TokenSequence((1, 2, 3, 4), ("a", "b", "c", "d"), 1)
    for k in range(4):
        assert len(masked_sequence(s, range(k))) == 4
        assert len(masked_sequence(s, range(k), "delete")) == 4 - k


def test_delete_never_evaluates_empty_sequence():
    s = TokenSequence((1, 2, 3), ("a", "b", "c"), 1)
    model = Constant()
    t = iterative_mask(model, s, fixed_attr([3, 2, 1]), mode="delete")
    assert len(t.steps) == 2 and t.flip_step is None and t.f == 1.0


def test_invalid_inputs():
    s = TokenSequence((1, 2), ("a", "b"), 1, (False, False))
    with pytest.raises(MaskingError):
        iterative_mask(Constant(), s, "occlusion")
    with pytest.raises(MaskingError):
        iterative_mask(Constant(), TokenSequence((1,), ("a",)), "occlusion", mode="drop")
    with pytest.raises(MaskingError):
        iterative_mask(Constant(), TokenSequence((1, 2), ("a", "b")), order=[0, 0])


def test_never_flipping_dataset():
    samples = [TokenSequence((1, 2), ("a", "b"), 1), TokenSequence((3,), ("c",), 1)]
    rep = fidelity(Constant(), samples, "occlusion")
    assert rep.fidelity == 0.0 and rep.non_perturbation_frequency == 1.0 and rep.K == 2


def test_single_sample_fidelity_075():
    rep = fidelity(FlipOnUnk(), [TokenSequence((1, 2, 3, 4), ("a", "b", "c", "d"), 1)], "occlusion")
    assert rep.per_sample_f == [0.25] and rep.fidelity == 0.75


def test_mean_masked_fraction_identity():
    traces = [MaskingTrace(0, [], (0.5, 0.5), 0, 3, 25, "unk_replace")]
    rep = FidelityReport.from_traces(traces)
    assert rep.fidelity == pytest.approx(0.88, abs=1e-12)
    assert abs(rep.mean_masked_fraction - (1 - rep.fidelity)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 20), st.integers(0, 20)), min_size=1, max_size=30))
def test_fidelity_identity_and_f_range(pairs):
    traces = []
    for n, c in pairs:
        flip = None if c == 0 or c > n else c
        traces.append(MaskingTrace(0, [], (0.5, 0.5), 0, flip, n, "unk_replace"))
    rep = FidelityReport.from_traces(traces)
    assert all(0 < f <= 1 for f in rep.per_sample_f)
    for t in traces:
        assert (t.f == 1.0) == (t.flip_step is None or t.flip_step == t.maskable_count)
    assert abs(rep.fidelity - (1 - math.fsum(rep.per_sample_f) / len(traces))) <= 1e-12
    assert abs(rep.mean_masked_fraction - (1 - rep.fidelity)) <= 1e-12


def test_aopc_hand_case():
    s = TokenSequence((1, 2), ("a", "b"), 1)
    model = ReplayModel([[0.1, 0.9], [0.4, 0.6]])
    assert aopc(model, [s], fixed_attr([1.0, 0.0]), L=1) == pytest.approx(0.15, abs=1e-12)


def test_aopc_constant_model_is_zero():
    samples = [TokenSequence((1, 2, 3), ("a", "b", "c"), 0)] * 3
    assert aopc(Constant(), samples, "occlusion", L=3) == 0.0
    assert aopc(Constant(), samples, L=3, random_seed=4) == 0.0


def test_aopc_clamps_L_to_maskable_count():
    s = TokenSequence((1, 2), ("a", "b"), 1)
    curves = perturbation_curves(Constant(), [s], "occlusion", L=5)
    assert curves[0].L == 2 and curves[0].clamped and curves[0].values[0] == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_aopc_bounded_by_initial_probability(seed):
    m = random_model(seed, num_classes=2)
    rng = np.random.default_rng(seed)
    samples = [TokenSequence(tuple(int(i) for i in rng.integers(1, 12, 6)), ("w",) * 6, 0) for _ in range(5)]
    for c, s in zip(perturbation_curves(m, samples, L=4, random_seed=seed), samples):
        p = m.predict(s)
        assert c.area <= p[predicted_class(p)]


def test_random_baseline_deterministic_and_never_flip():
    samples = [TokenSequence((1, 2, 3), ("a", "b", "c"), 0)] * 4
    a = random_baseline_fidelity(Constant(), samples, seed=3)
    b = random_baseline_fidelity(Constant(), samples, seed=3)
    assert a.fidelity == 0.0 and a.per_sample_f == b.per_sample_f
    assert [t.masked_indices for t in a.traces] == [t.masked_indices for t in b.traces]


def test_attribution_order_beats_random(sentiment):
    m, holdout = sentiment["model"], sentiment["holdout"]
    ours = fidelity(m, holdout).fidelity
    rand = np.mean([random_baseline_fidelity(m, holdout, seed).fidelity for seed in range(20)])
    print(f"fidelity attribution={ours:.3f} random={rand:.3f}")
    assert ours >= rand


def test_trace_and_report_roundtrip(tmp_path):
    s = published_sample()
    t = iterative_mask(replay(TRACE_MASK_POS), s, fixed_attr(TRACE_SCORES), sample_id=9)
    write_traces_jsonl(tmp_path / "t.jsonl", [t])
    assert read_traces_jsonl(tmp_path / "t.jsonl")[0] == t
    rep = FidelityReport.from_traces([t])
    write_report(rep, tmp_path / "r.json", tmp_path / "r.csv")
    assert read_per_sample_f(tmp_path / "r.csv") == rep.per_sample_f
