"""Vocabulary, whitespace tokenization, JSONL ingestion and synthetic datasets.

The vocabulary is closed: anything not in it maps to ``[UNK]`` (id 0), which
is also the token used when masking.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

UNK = "[UNK]"
UNK_ID = 0

KINDS = ("balanced_sentiment", "imbalanced_toxicity")

POSITIVE_WORDS = (
    "good", "great", "beautiful", "excellent", "wonderful",
    "brilliant", "superb", "delightful", "charming", "moving",
)
NEGATIVE_WORDS = (
    "bad", "awful", "dreadful", "terrible", "boring",
    "dull", "poor", "weak", "clumsy", "tedious",
)
REVIEW_FILLER = (
    "the", "film", "movie", "story", "plot", "acting", "was", "and",
    "with", "of", "scenes", "images", "words", "this", "director", "cast",
    "music", "ending", "characters", "script", "camera", "solemn", "long",
    "first", "hour", "its", "lead", "score",
)
TRIGGER_WORDS = (
    "idiot", "stupid", "moron", "loser", "trash", "pathetic", "dumb", "jerk",
)
COMMENT_FILLER = (
    "the", "article", "page", "edit", "you", "your", "source", "talk",
    "please", "section", "this", "is", "and", "of", "for", "revert",
    "citation", "needed", "thanks", "user", "discussion", "about", "wiki",
    "change", "history", "link", "template", "policy", "i", "think",
)


class CorpusError(ValueError):
    """Raised for malformed corpus input or invalid generator parameters."""


@dataclass(frozen=True)
class Vocab:
    tokens: tuple[str, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tokens = tuple(self.tokens)
        if not tokens or tokens[0] != UNK:
            raise CorpusError("vocab must start with [UNK]")
        for tok in tokens:
            if not tok or any(c.isspace() for c in tok):
                raise CorpusError(f"invalid vocab token {tok!r}")
        if len(set(tokens)) != len(tokens):
            raise CorpusError("vocab tokens must be distinct")
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(tokens)})

    @classmethod
    def build(cls, words: Iterable[str]) -> "Vocab":
        """Vocab from words in first-appearance order, ``[UNK]`` prepended."""
        seen = {UNK: None}
        for w in words:
            seen.setdefault(w, None)
        return cls(tuple(seen))

    @property
    def unk_id(self) -> int:
        return UNK_ID

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self._index

    def lookup(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(tuple(lines))


@dataclass(frozen=True)
class TokenSequence:
    """A tokenized sample. ``label`` is ``None`` for unlabeled text."""

    ids: tuple[int, ...]
    raw: tuple[str, ...]
    label: int | None = None
    maskable: tuple[bool, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
        object.__setattr__(self, "raw", tuple(self.raw))
        if not self.maskable:
            object.__setattr__(self, "maskable", (True,) * len(self.ids))
        else:
            object.__setattr__(self, "maskable", tuple(bool(m) for m in self.maskable))
        if not (len(self.ids) == len(self.raw) == len(self.maskable)):
            raise CorpusError("ids, raw and maskable must have equal lengths")
        if any(i < 0 for i in self.ids):
            raise CorpusError("token ids must be non-negative")

    def __len__(self):
        return len(self.ids)

    @property
    def maskable_count(self) -> int:
        return sum(self.maskable)

    def with_label(self, label: int | None) -> "TokenSequence":
        return replace(self, label=label)

    def with_maskable(self, maskable: Sequence[bool]) -> "TokenSequence":
        return replace(self, maskable=tuple(maskable))

    def text(self) -> str:
        return " ".join(self.raw)


@dataclass(frozen=True)
class Dataset:
    samples: tuple[TokenSequence, ...]
    num_classes: int
    name: str = "dataset"

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if self.num_classes < 2:
            raise CorpusError("num_classes must be >= 2")
        for s in self.samples:
            if s.label is None or not 0 <= s.label < self.num_classes:
                raise CorpusError(f"sample label {s.label!r} outside [0, {self.num_classes})")

    @property
    def class_counts(self) -> list[int]:
        counts = [0] * self.num_classes
        for s in self.samples:
            counts[s.label] += 1
        return counts

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples], dtype=int)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    def subset(self, indices: Iterable[int], name: str | None = None) -> "Dataset":
        return Dataset(tuple(self.samples[i] for i in indices), self.num_classes,
                       name or self.name)

    def to_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for s in self.samples:
                fh.write(json.dumps({"text": s.text(), "label": s.label}) + "\n")


def tokenize(text: str, vocab: Vocab) -> TokenSequence:
    raw = tuple(text.lower().split())
    return TokenSequence(tuple(vocab.lookup(t) for t in raw), raw)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str = "balanced_sentiment"
    num_samples: int = 100
    mean_length: int = 12
    minority_fraction: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CorpusError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        if self.minority_fraction is None:
            default = 0.5 if self.kind == "balanced_sentiment" else 0.09
            object.__setattr__(self, "minority_fraction", default)
        if self.kind == "balanced_sentiment" and self.minority_fraction != 0.5:
            raise CorpusError("balanced_sentiment requires minority_fraction = 0.5")
        if not 0.0 < self.minority_fraction <= 1.0:
            raise CorpusError(f"minority_fraction must lie in (0, 1], got {self.minority_fraction}")
        if self.num_samples < 10:
            raise CorpusError(f"num_samples must be >= 10, got {self.num_samples}")
        if self.mean_length < 3:
            raise CorpusError(f"mean_length must be >= 3, got {self.mean_length}")
        if not 0 <= self.seed < 2**64:
            raise CorpusError("seed must be an unsigned 64-bit integer")


def _length(rng: np.random.Generator, mean_length: int) -> int:
    spread = mean_length // 4
    return int(rng.integers(max(3, mean_length - spread), mean_length + spread + 1))


def _sentiment_sample(rng, label, mean_length):
    own, other = (POSITIVE_WORDS, NEGATIVE_WORDS) if label == 1 else (NEGATIVE_WORDS, POSITIVE_WORDS)
    while True:
        n = _length(rng, mean_length)
        k = int(rng.integers(1, max(1, n // 3) + 1))
        from_own = rng.random(k) < 0.7
        n_own = int(from_own.sum())
        # ties and wrong-majority draws are redrawn so labels stay noiseless
        if n_own > k - n_own:
            break
    words = [own[i] for i in rng.integers(0, len(own), n_own)]
    words += [other[i] for i in rng.integers(0, len(other), k - n_own)]
    words += [REVIEW_FILLER[i] for i in rng.integers(0, len(REVIEW_FILLER), n - k)]
    return [words[i] for i in rng.permutation(n)]


def _toxicity_sample(rng, label, mean_length):
    n = _length(rng, mean_length)
    k = int(rng.integers(1, min(3, n - 1) + 1)) if label == 1 else 0
    words = [TRIGGER_WORDS[i] for i in rng.integers(0, len(TRIGGER_WORDS), k)]
    words += [COMMENT_FILLER[i] for i in rng.integers(0, len(COMMENT_FILLER), n - k)]
    return [words[i] for i in rng.permutation(n)]


def generator_vocab(kind: str) -> Vocab:
    if kind == "balanced_sentiment":
        return Vocab.build(POSITIVE_WORDS + NEGATIVE_WORDS + REVIEW_FILLER)
    if kind == "imbalanced_toxicity":
        return Vocab.build(TRIGGER_WORDS + COMMENT_FILLER)
    raise CorpusError(f"unknown generator kind {kind!r}")


def generate_dataset(spec: GeneratorSpec) -> tuple[Dataset, Vocab]:
    """Generate a labeled synthetic dataset, deterministic in ``spec.seed``.

    ``balanced_sentiment``: class 1 (positive) samples carry strictly more
    positive than negative keywords, class 0 the reverse; classes are split
    50/50. ``imbalanced_toxicity``: class 1 is the minority and every
    minority sample contains at least one trigger word; majority samples
    contain none.
    """
    rng = np.random.default_rng(spec.seed)
    vocab = generator_vocab(spec.kind)
    n_minority = int(round(spec.num_samples * spec.minority_fraction))
    if spec.kind == "balanced_sentiment":
        n_minority = spec.num_samples // 2
    labels = np.array([1] * n_minority + [0] * (spec.num_samples - n_minority))
    labels = labels[rng.permutation(spec.num_samples)]
    make = _sentiment_sample if spec.kind == "balanced_sentiment" else _toxicity_sample
    samples = []
    for label in labels:
        words = make(rng, int(label), spec.mean_length)
        samples.append(TokenSequence(tuple(vocab.lookup(w) for w in words), tuple(words), int(label)))
    name = f"{spec.kind}-{spec.num_samples}-{spec.seed}"
    return Dataset(tuple(samples), 2, name), vocab


def load_jsonl(path, vocab: Vocab | None = None) -> tuple[Dataset, Vocab]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                text, label = obj["text"], obj["label"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}: malformed record on line {lineno}: {exc}") from exc
            if not isinstance(text, str) or isinstance(label, bool) or not isinstance(label, int):
                raise CorpusError(f"{path}: line {lineno} needs a string 'text' and integer 'label'")
            if label < 0:
                raise CorpusError(f"{path}: negative label {label} on line {lineno}")
            records.append((text, label))
    if vocab is None:
        vocab = Vocab.build(w for text, _ in records for w in text.lower().split())
    samples = tuple(tokenize(text, vocab).with_label(label) for text, label in records)
    num_classes = max(2, max((label for _, label in records), default=0) + 1)
    return Dataset(samples, num_classes, Path(path).stem), vocab
