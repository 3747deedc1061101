"""Integrated gradients and occlusion on one sample, plus the resulting masking order."""
import numpy as np

from maskfaith.attribution import integrated_gradients, occlusion, rank_tokens
from maskfaith.corpus import GeneratorSpec, generate_dataset
from maskfaith.harness.config import ModelConfig
from maskfaith.model import TinyTextClassifier, predicted_class, train

data, vocab = generate_dataset(GeneratorSpec("balanced_sentiment", 200, 10, seed=7))
model, _ = train(TinyTextClassifier(vocab.size, seed=1), data, ModelConfig().train_config(3))

s = data.samples[0]
y = predicted_class(model.predict(s))
ig = integrated_gradients(model, s, y)
occ = occlusion(model, s, y)
for w, a, b in zip(s.raw, ig.scores, occ.scores):
    print(f"{w:>12s}  ig={a:+.4f}  occlusion={b:+.4f}")

# completeness: IG scores sum to roughly F(x) - F(baseline)
print(f"sum of IG scores {np.sum(ig.scores):+.4f}")
print("masking order:", [s.raw[i] for i in rank_tokens(ig, s.maskable)])
