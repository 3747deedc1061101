"""Fidelity, non-perturbation frequency and AOPC against a random-order baseline."""
import numpy as np

from maskfaith.corpus import GeneratorSpec, generate_dataset
from maskfaith.harness.config import ModelConfig
from maskfaith.masking import aopc, fidelity, iterative_mask, random_baseline_fidelity
from maskfaith.model import TinyTextClassifier, train

data, vocab = generate_dataset(GeneratorSpec("balanced_sentiment", 300, 12, seed=7))
train_set, holdout = data.subset(range(240)), data.subset(range(240, 300))
model, _ = train(TinyTextClassifier(vocab.size, seed=1), train_set, ModelConfig().train_config(3))

t = iterative_mask(model, holdout.samples[0])
print("masked:", [holdout.samples[0].raw[i] for i in t.masked_indices], "flip step:", t.flip_step)

rep = fidelity(model, holdout)
rand = np.mean([random_baseline_fidelity(model, holdout, seed).fidelity for seed in range(10)])
print(f"fidelity {rep.fidelity:.3f} (random order {rand:.3f}); NPF {rep.non_perturbation_frequency:.3f}")
print(f"AOPC@5 attribution {aopc(model, holdout, L=5):.3f}  random {aopc(model, holdout, L=5, random_seed=0):.3f}")
