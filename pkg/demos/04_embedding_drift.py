"""How pooled embeddings move as more salient tokens are masked, with a 2-D PCA view."""
from maskfaith.corpus import GeneratorSpec, generate_dataset
from maskfaith.drift import curve_from_sets, masked_embedding_sets, pca_projection
from maskfaith.harness.config import ModelConfig
from maskfaith.model import TinyTextClassifier, train

data, vocab = generate_dataset(GeneratorSpec("imbalanced_toxicity", 400, 20, seed=7))
model, _ = train(TinyTextClassifier(vocab.size, seed=1), data, ModelConfig().train_config(3))

sets = masked_embedding_sets(model, data, fractions=(0.0, 0.1, 0.2, 0.3, 0.4, 0.5))
curve = curve_from_sets(sets)
print(" q    mean_cos  centroid_cos  d_mu    d_sigma")
for row in zip(curve.mask_fractions, curve.mean_cos_to_clean_centroid, curve.centroid_cos,
               curve.delta_mu, curve.delta_sigma):
    print("{:.1f}  {:+.4f}   {:+.4f}      {:.4f}  {:+.4f}".format(*row))

proj = pca_projection([sets[0], sets[-1]])
for name, pts in zip(("clean", "masked 50%"), proj.points):
    print(f"{name:>10s}: PCA spread {pts.std(axis=0).round(3)}")
