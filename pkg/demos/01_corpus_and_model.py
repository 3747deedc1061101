"""Generate a synthetic sentiment corpus, train the tiny classifier, check holdout accuracy."""
from maskfaith.corpus import GeneratorSpec, generate_dataset, tokenize
from maskfaith.harness.config import ModelConfig
from maskfaith.model import TinyTextClassifier, accuracy, train

data, vocab = generate_dataset(GeneratorSpec("balanced_sentiment", 300, 12, seed=7))
train_set, holdout = data.subset(range(240)), data.subset(range(240, 300))
print(f"vocab size {vocab.size}; first sample: {data.samples[0].text()!r} label={data.samples[0].label}")

model, history = train(TinyTextClassifier(vocab.size, seed=1), train_set, ModelConfig().train_config(3))
print(f"loss {history[0]:.3f} -> {history[-1]:.3f} over {len(history)} epochs")
print(f"holdout accuracy {accuracy(model, holdout):.3f}")

for text in ("a beautiful film", "a dreadful film"):
    print(f"{text!r}: p = {model.predict(tokenize(text, vocab)).round(3)}")
