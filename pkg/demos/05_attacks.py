"""Three attacks on a trained classifier, then adversarial fine-tuning."""
import numpy as np

from maskfaith.adversary import (adversarial_train, char_noise_attack, greedy_substitute_attack,
                                 saliency_mask_attack, sentiment_substitution_table)
from maskfaith.corpus import GeneratorSpec, generate_dataset
from maskfaith.harness.config import ModelConfig
from maskfaith.masking import fidelity
from maskfaith.model import TinyTextClassifier, TrainConfig, predicted_class, train

data, vocab = generate_dataset(GeneratorSpec("balanced_sentiment", 300, 12, seed=7))
train_set, holdout = data.subset(range(240)), data.subset(range(240, 300))
model, _ = train(TinyTextClassifier(vocab.size, seed=1), train_set, ModelConfig().train_config(3))
table = sentiment_substitution_table(vocab)

s = holdout.samples[0]
for r in (saliency_mask_attack(model, s, "integrated_gradients", 0.5),
          greedy_substitute_attack(model, s, "integrated_gradients", table, 0.5, vocab=vocab),
          char_noise_attack(model, s, vocab, "integrated_gradients", 0.5, seed=0)):
    print(f"{r.attack_kind:>18s} success={r.success} queries={r.queries}: {r.perturbed.text()!r}")

attacks = [greedy_substitute_attack(model, x, "integrated_gradients", table, 0.5, vocab=vocab)
           for x in train_set.samples[:120]]
res = adversarial_train(model, train_set, attacks, TrainConfig(learning_rate=0.5, epochs=10, batch_size=8, seed=3))
held = [greedy_substitute_attack(model, x, "integrated_gradients", table, 0.5, vocab=vocab) for x in holdout]
adv = [r.perturbed.with_label(r.original.label) for r in held if r.success]
for name, m in (("before", model), ("after", res.model)):
    acc = np.mean([predicted_class(m.predict(x)) == x.label for x in adv])
    print(f"{name:>6s}: adversarial accuracy {acc:.3f}, fidelity {fidelity(m, holdout).fidelity:.3f}")
