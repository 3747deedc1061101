"""Classifier contract and a tiny mean-pooled text classifier with analytic gradients.

Forward pass of :class:`TinyTextClassifier`::

    p = mean_i E[ids[i]]          # pooled input embedding, length d
    a = tanh(W1 p + b1)           # hidden activation, length h (the sample embedding)
    z = W2 a + b2                 # logits, length C
    y = softmax(z)
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import UNK_ID, Dataset, TokenSequence

PARAM_NAMES = ("E", "W1", "b1", "W2", "b2")


class ModelError(ValueError):
    pass


class CapabilityError(ModelError):
    """The model does not support the requested operation."""


class TrainingError(RuntimeError):
    pass


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


class ClassifierModel:
    """Base contract consumed by attribution, masking and drift code.

    Subclasses set ``differentiable`` / ``embeddable`` and override the
    matching methods. ``predict`` is the only mandatory operation.
    """

    num_classes: int
    embedding_dim: int
    differentiable = False
    embeddable = False

    def predict(self, sample: TokenSequence) -> np.ndarray:
        raise NotImplementedError

    def embed(self, sample: TokenSequence) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} cannot embed samples")

    def input_embeddings(self, sample: TokenSequence) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} is not differentiable")

    def predict_embeddings(self, x: np.ndarray) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} is not differentiable")

    def grad_wrt_inputs(self, x: np.ndarray, target_class: int) -> np.ndarray:
        raise CapabilityError(f"{type(self).__name__} is not differentiable")


def predict(model: ClassifierModel, sample: TokenSequence) -> np.ndarray:
    return model.predict(sample)


def embed_sample(model: ClassifierModel, sample: TokenSequence) -> np.ndarray:
    if not model.embeddable:
        raise CapabilityError(f"{type(model).__name__} cannot embed samples")
    return model.embed(sample)


def input_embeddings(model: ClassifierModel, sample: TokenSequence) -> np.ndarray:
    if not model.differentiable:
        raise CapabilityError(f"{type(model).__name__} is not differentiable")
    return model.input_embeddings(sample)


def grad_wrt_inputs(model: ClassifierModel, x: np.ndarray, target_class: int) -> np.ndarray:
    if not model.differentiable:
        raise CapabilityError(f"{type(model).__name__} is not differentiable")
    if not 0 <= target_class < model.num_classes:
        raise ModelError(f"target_class {target_class} outside [0, {model.num_classes})")
    g = model.grad_wrt_inputs(x, target_class)
    if not np.all(np.isfinite(g)):
        raise ModelError("non-finite input gradient")
    return g


def predicted_class(probs: np.ndarray) -> int:
    # np.argmax resolves exact ties to the lowest index
    return int(np.argmax(probs))


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 20
    batch_size: int = 16
    weight_decay: float = 0.0
    seed: int = 0
    shuffle: bool = True
    unk_dropout: float = 0.0

    def __post_init__(self):
        if not 1e-6 <= self.learning_rate <= 1.0:
            raise ModelError(f"learning_rate must lie in [1e-6, 1], got {self.learning_rate}")
        if not 0 <= self.epochs <= 10000:
            raise ModelError(f"epochs must lie in [0, 10000], got {self.epochs}")
        if self.batch_size < 1:
            raise ModelError("batch_size must be >= 1")
        if self.weight_decay < 0:
            raise ModelError("weight_decay must be non-negative")
        if not 0.0 <= self.unk_dropout < 1.0:
            raise ModelError("unk_dropout must lie in [0, 1)")


class TinyTextClassifier(ClassifierModel):
    differentiable = True
    embeddable = True

    def __init__(self, vocab_size, num_classes=2, embed_dim=16, hidden_dim=32, seed=0,
                 params=None):
        self.vocab_size = int(vocab_size)
        self.num_classes = int(num_classes)
        self.embed_dim = int(embed_dim)
        self.hidden_dim = int(hidden_dim)
        self.seed = int(seed)
        if self.vocab_size < 1 or self.num_classes < 2 or self.embed_dim < 1 or self.hidden_dim < 1:
            raise ModelError("invalid model dimensions")
        shapes = self.param_shapes()
        if params is None:
            rng = np.random.default_rng(self.seed)
            params = {k: rng.uniform(-0.1, 0.1, size=shapes[k]) for k in PARAM_NAMES}
        self.params = {}
        for k in PARAM_NAMES:
            arr = np.array(params[k], dtype=float).reshape(shapes[k])
            self.params[k] = arr

    @property
    def embedding_dim(self) -> int:
        return self.hidden_dim

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        V, d, h, C = self.vocab_size, self.embed_dim, self.hidden_dim, self.num_classes
        return {"E": (V, d), "W1": (h, d), "b1": (h,), "W2": (C, h), "b2": (C,)}

    @classmethod
    def zeros(cls, vocab_size, num_classes=2, embed_dim=16, hidden_dim=32):
        m = cls(vocab_size, num_classes, embed_dim, hidden_dim)
        for k in PARAM_NAMES:
            m.params[k][...] = 0.0
        return m

    def copy(self) -> "TinyTextClassifier":
        return copy.deepcopy(self)

    # -- forward ---------------------------------------------------------
    def _check(self, sample: TokenSequence) -> np.ndarray:
        if len(sample) == 0:
            raise ModelError("empty input")
        ids = np.asarray(sample.ids, dtype=int)
        if ids.min() < 0 or ids.max() >= self.vocab_size:
            raise ModelError(f"token id out of range for vocab of size {self.vocab_size}")
        return ids

    def _hidden(self, pooled):
        return np.tanh(self.params["W1"] @ pooled + self.params["b1"])

    def input_embeddings(self, sample):
        return self.params["E"][self._check(sample)].copy()

    def predict_embeddings(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ModelError("empty input")
        a = self._hidden(x.mean(axis=0))
        return softmax(self.params["W2"] @ a + self.params["b2"])

    def predict(self, sample):
        return self.predict_embeddings(self.input_embeddings(sample))

    def embed(self, sample):
        return self._hidden(self.input_embeddings(sample).mean(axis=0))

    def grad_wrt_inputs(self, x, target_class):
        x = np.asarray(x, dtype=float)
        n = x.shape[0]
        W1, W2 = self.params["W1"], self.params["W2"]
        a = self._hidden(x.mean(axis=0))
        y = softmax(W2 @ a + self.params["b2"])
        dz = -y[target_class] * y
        dz[target_class] += y[target_class]
        dpooled = W1.T @ ((W2.T @ dz) * (1.0 - a * a))
        return np.tile(dpooled / n, (n, 1))

    # -- training --------------------------------------------------------
    def loss_and_grads(self, samples, weight_decay=0.0):
        """Mean cross-entropy over ``samples`` and its gradient for every parameter."""
        E, W1, b1, W2, b2 = (self.params[k] for k in PARAM_NAMES)
        grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        loss = 0.0
        for s in samples:
            ids = self._check(s)
            p = E[ids].mean(axis=0)
            a = np.tanh(W1 @ p + b1)
            y = softmax(W2 @ a + b2)
            loss -= np.log(max(y[s.label], 1e-300))
            dz = y.copy()
            dz[s.label] -= 1.0
            grads["W2"] += np.outer(dz, a)
            grads["b2"] += dz
            dh = (W2.T @ dz) * (1.0 - a * a)
            grads["W1"] += np.outer(dh, p)
            grads["b1"] += dh
            np.add.at(grads["E"], ids, (W1.T @ dh) / len(ids))
        m = len(samples)
        loss /= m
        for k in PARAM_NAMES:
            grads[k] /= m
        if weight_decay:
            for k in PARAM_NAMES:
                loss += 0.5 * weight_decay * float(np.sum(self.params[k] ** 2))
                grads[k] += weight_decay * self.params[k]
        return loss, grads

    # -- persistence -----------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size, "num_classes": self.num_classes,
            "embed_dim": self.embed_dim, "hidden_dim": self.hidden_dim, "seed": self.seed,
            "params": {k: self.params[k].ravel().tolist() for k in PARAM_NAMES},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TinyTextClassifier":
        return cls(d["vocab_size"], d["num_classes"], d["embed_dim"], d["hidden_dim"],
                   d["seed"], params=d["params"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TinyTextClassifier":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train(model: TinyTextClassifier, data: Dataset, cfg: TrainConfig):
    """Mini-batch SGD on mean cross-entropy; returns ``(trained_copy, epoch_losses)``.

    The input model is left untouched.
    """
    if len(data) == 0:
        raise TrainingError("cannot train on an empty dataset")
    if data.num_classes != model.num_classes:
        raise TrainingError(f"dataset has {data.num_classes} classes, model {model.num_classes}")
    model = model.copy()
    rng = np.random.default_rng(cfg.seed)
    samples = list(data.samples)
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(samples)) if cfg.shuffle else np.arange(len(samples))
        total = 0.0
        for start in range(0, len(samples), cfg.batch_size):
            batch = [samples[i] for i in order[start:start + cfg.batch_size]]
            if cfg.unk_dropout:
                batch = [_drop_tokens(s, cfg.unk_dropout, rng) for s in batch]
            loss, grads = model.loss_and_grads(batch, cfg.weight_decay)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            for k in PARAM_NAMES:
                model.params[k] -= cfg.learning_rate * grads[k]
                if not np.all(np.isfinite(model.params[k])):
                    raise TrainingError(f"non-finite parameter {k} at epoch {epoch}")
            total += loss * len(batch)
        history.append(total / len(samples))
    return model, history


def _drop_tokens(sample, rate, rng):
    drop = rng.random(len(sample)) < rate
    ids = tuple(UNK_ID if d else t for d, t in zip(drop, sample.ids))
    return TokenSequence(ids, sample.raw, sample.label, sample.maskable)


def accuracy(model: ClassifierModel, data: Dataset) -> float:
    hits = sum(predicted_class(model.predict(s)) == s.label for s in data)
    return hits / len(data)


class ReplayModel(ClassifierModel):
    """Returns scripted probability vectors in order; useful for replaying published traces."""

    def __init__(self, script):
        self.script = [np.asarray(p, dtype=float) for p in script]
        if not self.script:
            raise ModelError("empty replay script")
        self.num_classes = len(self.script[0])
        self.embedding_dim = self.num_classes
        self.cursor = 0

    def predict(self, sample):
        if len(sample) == 0:
            raise ModelError("empty input")
        if self.cursor >= len(self.script):
            raise ModelError("replay script exhausted")
        p = self.script[self.cursor]
        self.cursor += 1
        return p.copy()
