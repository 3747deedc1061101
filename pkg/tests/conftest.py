import numpy as np
import pytest

from maskfaith.corpus import GeneratorSpec, generate_dataset
from maskfaith.harness.config import ModelConfig
from maskfaith.model import TinyTextClassifier, train


@pytest.fixture(scope="session")
def sentiment():
    """Keyword-separable sentiment data: 240 training samples and a 60-sample holdout."""
    data, vocab = generate_dataset(GeneratorSpec("balanced_sentiment", 300, 12, seed=7))
    train_set = data.subset(range(240), "sentiment-train")
    holdout = data.subset(range(240, 300), "sentiment-holdout")
    model, history = train(TinyTextClassifier(vocab.size, seed=1), train_set, ModelConfig().train_config(3))
    return {"data": data, "vocab": vocab, "train": train_set, "holdout": holdout,
            "model": model, "history": history}


@pytest.fixture(scope="session")
def toxicity():
    data, vocab = generate_dataset(GeneratorSpec("imbalanced_toxicity", 400, 20, seed=7))
    model, history = train(TinyTextClassifier(vocab.size, seed=1), data, ModelConfig().train_config(3))
    return {"data": data, "vocab": vocab, "model": model, "history": history}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{label}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":").split("(")[0])):
            terminalreporter.write_line(line)
