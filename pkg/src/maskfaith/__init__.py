"""Faithfulness measures for text classifiers built on iterative token masking.

Submodules: :mod:`~maskfaith.corpus` (vocab, tokenization, datasets),
:mod:`~maskfaith.model` (classifier contract, tiny classifier, training),
:mod:`~maskfaith.attribution` (integrated gradients, occlusion),
:mod:`~maskfaith.masking` (fidelity, AOPC, non-perturbation frequency),
:mod:`~maskfaith.drift` (embedding drift, PCA projection),
:mod:`~maskfaith.adversary` (attacks, adversarial training) and
:mod:`~maskfaith.harness` (pipeline, CLI, plots).
"""
from .attribution import AttributionVector, integrated_gradients, occlusion, rank_tokens
from .corpus import Dataset, GeneratorSpec, TokenSequence, Vocab, generate_dataset, load_jsonl, tokenize
from .masking import FidelityReport, MaskingTrace, aopc, fidelity, iterative_mask, random_baseline_fidelity
from .model import ReplayModel, TinyTextClassifier, TrainConfig, predict, train

__version__ = "0.1.0"
