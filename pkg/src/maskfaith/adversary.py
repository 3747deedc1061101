"""Saliency-guided attacks on text classifiers and adversarial training.

All attacks visit maskable tokens in descending attribution order for the
initially predicted class, and count budgets as a fraction of the sample's
maskable tokens.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .attribution import DEFAULT_STEPS, AttributionSource, attribute, rank_tokens
from .corpus import NEGATIVE_WORDS, POSITIVE_WORDS, REVIEW_FILLER, Dataset, TokenSequence, Vocab, tokenize
from .masking import iterative_mask, masked_sequence
from .model import ClassifierModel, TinyTextClassifier, TrainConfig, predicted_class, train

ATTACK_KINDS = ("saliency_mask", "greedy_substitute", "char_noise")


class AttackError(ValueError):
    pass


@dataclass
class AttackResult:
    original: TokenSequence
    perturbed: TokenSequence
    success: bool
    perturbed_fraction: float
    queries: int
    attack_kind: str

    def to_dict(self) -> dict:
        return {"original": self.original.text(), "perturbed": self.perturbed.text(),
                "label": self.original.label, "success": self.success,
                "attack_kind": self.attack_kind, "perturbed_fraction": self.perturbed_fraction}


class SubstitutionTable(dict):
    """Maps a token id to a tuple of candidate replacement ids."""

    def __init__(self, mapping=(), vocab_size: int | None = None):
        super().__init__()
        for src, cands in dict(mapping).items():
            cands = tuple(int(c) for c in cands)
            if int(src) in cands:
                raise AttackError(f"token {src} maps to itself")
            if vocab_size is not None and not all(0 <= i < vocab_size for i in (int(src),) + cands):
                raise AttackError(f"substitution for token {src} references an invalid id")
            self[int(src)] = cands

    @classmethod
    def load(cls, path, vocab: Vocab) -> "SubstitutionTable":
        mapping = {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                tok, rest = line.split("\t")
            except ValueError:
                raise AttackError(f"{path}: line {lineno} is not 'token<TAB>candidates'") from None
            unknown = [w for w in [tok] + rest.split(",") if w not in vocab]
            if unknown:
                raise AttackError(f"{path}: line {lineno} has out-of-vocabulary tokens {unknown}")
            mapping[vocab.lookup(tok)] = [vocab.lookup(c) for c in rest.split(",")]
        return cls(mapping, vocab.size)

    def save(self, path, vocab: Vocab) -> None:
        lines = [f"{vocab.tokens[s]}\t{','.join(vocab.tokens[c] for c in cands)}"
                 for s, cands in sorted(self.items())]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def sentiment_substitution_table(vocab: Vocab) -> SubstitutionTable:
    """Antonym-style table for the generated sentiment lexicon.

    Each sentiment keyword may be replaced by any keyword of the opposite
    polarity; filler words may be swapped for other filler words.
    """
    groups = [(POSITIVE_WORDS, NEGATIVE_WORDS), (NEGATIVE_WORDS, POSITIVE_WORDS)]
    mapping = {}
    for src, dst in groups:
        for w in src:
            if w in vocab:
                mapping[vocab.lookup(w)] = [vocab.lookup(c) for c in dst if c in vocab]
    fill = [w for w in REVIEW_FILLER if w in vocab]
    for w in fill:
        mapping[vocab.lookup(w)] = [vocab.lookup(c) for c in fill if c != w]
    return SubstitutionTable(mapping, vocab.size)


def full_substitution_table(vocab: Vocab) -> SubstitutionTable:
    """Every in-vocabulary token may become any other in-vocabulary token."""
    ids = range(1, vocab.size)
    return SubstitutionTable({i: [j for j in ids if j != i] for i in ids}, vocab.size)


def _budget(budget_fraction: float, n: int) -> int:
    if not 0.0 < budget_fraction <= 1.0:
        raise AttackError(f"budget_fraction must lie in (0, 1], got {budget_fraction}")
    return min(n, math.ceil(round(budget_fraction * n, 9)))


def saliency_mask_attack(model: ClassifierModel, sample: TokenSequence,
                         attr_method: AttributionSource = "integrated_gradients",
                         budget_fraction: float = 1.0, *, steps: int = DEFAULT_STEPS) -> AttackResult:
    """Iterative UNK masking truncated at ``ceil(budget * N)`` steps."""
    n = sample.maskable_count
    limit = _budget(budget_fraction, n)
    trace = iterative_mask(model, sample, attr_method, "unk_replace", False, steps=steps, max_steps=limit)
    perturbed = masked_sequence(sample, trace.masked_indices)
    return AttackResult(sample, perturbed, trace.flipped, len(trace.steps) / n,
                        1 + len(trace.steps), "saliency_mask")


def greedy_substitute_attack(model: ClassifierModel, sample: TokenSequence,
                             attr_method: AttributionSource = "integrated_gradients",
                             table: SubstitutionTable | None = None, budget_fraction: float = 1.0, *,
                             vocab: Vocab | None = None, steps: int = DEFAULT_STEPS) -> AttackResult:
    """Greedy word substitution in attribution order.

    At each visited token every candidate is tried and the one giving the
    lowest original-class probability is kept, provided it lowers that
    probability. ``queries`` counts all model evaluations including the
    initial prediction. With ``vocab`` given, substituted raw tokens take the
    candidate's surface form.
    """
    if not table:
        raise AttackError("empty substitution table")
    n = sample.maskable_count
    limit = _budget(budget_fraction, n)
    probs = model.predict(sample)
    queries = 1
    y0 = predicted_class(probs)
    order = rank_tokens(attribute(model, sample, attr_method, y0, steps), sample.maskable)
    ids, raw = list(sample.ids), list(sample.raw)
    current = float(probs[y0])
    changed = 0
    success = False
    for i in order:
        if changed >= limit or success:
            break
        best = None
        for cand in table.get(ids[i], ()):
            trial = TokenSequence(tuple(ids[:i] + [cand] + ids[i + 1:]), tuple(raw), sample.label,
                                  sample.maskable)
            p = model.predict(trial)
            queries += 1
            if best is None or p[y0] < best[1][y0]:
                best = (cand, p)
        if best is None or best[1][y0] >= current:
            continue
        ids[i] = best[0]
        if vocab is not None:
            raw[i] = vocab.tokens[best[0]]
        current = float(best[1][y0])
        changed += 1
        success = predicted_class(best[1]) != y0
    perturbed = TokenSequence(tuple(ids), tuple(raw), sample.label, sample.maskable)
    return AttackResult(sample, perturbed, success, changed / n, queries, "greedy_substitute")


def transpose_chars(token: str, rng: np.random.Generator, vocab: Vocab | None = None) -> str | None:
    """Swap one adjacent pair of differing characters; ``None`` if impossible.

    Positions whose swap yields an out-of-vocabulary word are preferred.
    """
    positions = [j for j in range(len(token) - 1) if token[j] != token[j + 1]]
    if not positions:
        return None
    swap = lambda j: token[:j] + token[j + 1] + token[j] + token[j + 2:]
    if vocab is not None:
        oov = [j for j in positions if swap(j) not in vocab]
        positions = oov or positions
    return swap(positions[int(rng.integers(len(positions)))])


def char_noise_attack(model: ClassifierModel, sample: TokenSequence, vocab: Vocab,
                      attr_method: AttributionSource = "integrated_gradients",
                      budget_fraction: float = 1.0, seed: int = 0, *,
                      steps: int = DEFAULT_STEPS) -> AttackResult:
    """Character transposition on salient tokens, re-tokenized with the closed vocab.

    Transposed words almost always fall outside the vocabulary and become
    ``[UNK]``, so on such samples the class trajectory matches
    :func:`saliency_mask_attack`; the raw surface form records the edit.
    Tokens with no transposable pair are skipped.
    """
    rng = np.random.default_rng(seed)
    n = sample.maskable_count
    limit = _budget(budget_fraction, n)
    probs = model.predict(sample)
    queries = 1
    y0 = predicted_class(probs)
    order = rank_tokens(attribute(model, sample, attr_method, y0, steps), sample.maskable)
    ids, raw = list(sample.ids), list(sample.raw)
    changed = 0
    success = False
    for i in order[:limit]:
        noised = transpose_chars(raw[i], rng, vocab)
        if noised is None:
            continue
        raw[i] = noised
        ids[i] = tokenize(noised, vocab).ids[0]
        changed += 1
        p = model.predict(TokenSequence(tuple(ids), tuple(raw), sample.label, sample.maskable))
        queries += 1
        if predicted_class(p) != y0:
            success = True
            break
    perturbed = TokenSequence(tuple(ids), tuple(raw), sample.label, sample.maskable)
    return AttackResult(sample, perturbed, success, changed / n, queries, "char_noise")


def verify_success(model: ClassifierModel, result: AttackResult) -> bool:
    """Re-evaluate whether the attack really changed the predicted class."""
    return predicted_class(model.predict(result.perturbed)) != predicted_class(model.predict(result.original))


@dataclass
class AdversarialTrainingResult:
    model: TinyTextClassifier
    history: list[float]
    train_set: Dataset
    validation_set: Dataset
    validation_accuracy: float | None


def mixed_dataset(clean: Dataset, attacks: Sequence[AttackResult], seed: int) -> Dataset:
    """Equal numbers of clean and successful adversarial samples, seeded downsampling."""
    adv = [a.perturbed.with_label(a.original.label) for a in attacks if a.success]
    if not adv:
        raise AttackError("no successful attacks to train on")
    rng = np.random.default_rng(seed)
    n = min(len(clean), len(adv))
    clean_pick = sorted(rng.choice(len(clean), n, replace=False).tolist())
    adv_pick = sorted(rng.choice(len(adv), n, replace=False).tolist())
    samples = [clean[i] for i in clean_pick] + [adv[i] for i in adv_pick]
    samples = [samples[i] for i in rng.permutation(len(samples))]
    return Dataset(tuple(samples), clean.num_classes, f"{clean.name}+adv")


def adversarial_train(model: TinyTextClassifier, clean: Dataset, attacks: Sequence[AttackResult],
                      cfg: TrainConfig, validation_fraction: float = 0.1) -> AdversarialTrainingResult:
    """Fine-tune on a half-clean, half-adversarial mix with a train/validation split.

    Adversarial samples keep the original sample's true label.
    """
    if not attacks:
        raise AttackError("attacks must be non-empty")
    mixed = mixed_dataset(clean, attacks, cfg.seed)
    n_val = int(round(len(mixed) * validation_fraction))
    train_set = mixed.subset(range(n_val, len(mixed)), f"{mixed.name}-train")
    val_set = mixed.subset(range(n_val), f"{mixed.name}-val")
    trained, history = train(model, train_set, cfg)
    val_acc = None
    if len(val_set):
        val_acc = sum(predicted_class(trained.predict(s)) == s.label for s in val_set) / len(val_set)
    return AdversarialTrainingResult(trained, history, train_set, val_set, val_acc)


def write_attacks_jsonl(path, results: Sequence[AttackResult]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in results:
            fh.write(json.dumps(r.to_dict()) + "\n")


def read_attacks_jsonl(path, vocab: Vocab) -> list[AttackResult]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            orig = tokenize(d["original"], vocab).with_label(d["label"])
            pert = tokenize(d["perturbed"], vocab).with_label(d["label"])
            out.append(AttackResult(orig, pert, d["success"], d["perturbed_fraction"], 0, d["attack_kind"]))
    return out
