"""Independent reference computations used by the test suite."""
import numpy as np

from maskfaith.corpus import TokenSequence
from maskfaith.model import PARAM_NAMES, TinyTextClassifier

FD_STEP = 1e-4
# relative error denominator floor; keeps coordinates whose true gradient is
# ~0 from turning rounding noise into a huge ratio
REL_FLOOR = 1e-8


def rel_error(a, b):
    return abs(a - b) / max(abs(a), abs(b), REL_FLOOR)


def random_model(seed, vocab_size=12, num_classes=3, embed_dim=5, hidden_dim=7, scale=0.6):
    rng = np.random.default_rng(seed)
    m = TinyTextClassifier(vocab_size, num_classes, embed_dim, hidden_dim, seed=seed)
    for k in PARAM_NAMES:
        m.params[k] = rng.normal(0.0, scale, size=m.params[k].shape)
    return m


def random_samples(seed, vocab_size, num_classes, count=4, max_len=6):
    rng = np.random.default_rng(seed + 1000)
    out = []
    for _ in range(count):
        n = int(rng.integers(1, max_len + 1))
        ids = tuple(int(i) for i in rng.integers(0, vocab_size, n))
        out.append(TokenSequence(ids, tuple(f"w{i}" for i in ids), int(rng.integers(num_classes))))
    return out


def fd_input_errors(model, sample, target, coords, h=FD_STEP):
    """Relative errors of grad_wrt_inputs against central differences at ``coords``."""
    x = model.input_embeddings(sample)
    g = model.grad_wrt_inputs(x, target)
    errs = []
    for i, j in coords:
        xp, xm = x.copy(), x.copy()
        xp[i, j] += h
        xm[i, j] -= h
        num = (model.predict_embeddings(xp)[target] - model.predict_embeddings(xm)[target]) / (2 * h)
        errs.append(rel_error(g[i, j], num))
    return errs


def fd_param_errors(model, samples, name, coords, weight_decay=0.0, h=FD_STEP):
    _, grads = model.loss_and_grads(samples, weight_decay)
    p = model.params[name]
    errs = []
    for idx in coords:
        old = p[idx]
        p[idx] = old + h
        lp, _ = model.loss_and_grads(samples, weight_decay)
        p[idx] = old - h
        lm, _ = model.loss_and_grads(samples, weight_decay)
        p[idx] = old
        errs.append(rel_error(grads[name][idx], (lp - lm) / (2 * h)))
    return errs


def gradient_check(seed, coords_per_tensor=20):
    """Max relative error over input-embedding and all parameter gradients of one random model.

    Returns ``(max_error, coordinates_checked)``.
    """
    rng = np.random.default_rng(seed)
    m = random_model(seed)
    samples = random_samples(seed, m.vocab_size, m.num_classes)
    errs = []
    for s in samples:
        n = len(s)
        coords = [(int(rng.integers(n)), int(rng.integers(m.embed_dim))) for _ in range(coords_per_tensor // 2)]
        errs += fd_input_errors(m, s, int(rng.integers(m.num_classes)), coords)
    for name in PARAM_NAMES:
        shape = m.params[name].shape
        coords = [tuple(int(rng.integers(d)) for d in shape) for _ in range(coords_per_tensor)]
        errs += fd_param_errors(m, samples, name, coords, weight_decay=0.01)
    return max(errs), len(errs)


def linear_ig_oracle(x, w):
    """IG scores for F(x) = w . mean_rows(x): each token gets (w . x_i) / n."""
    n = x.shape[0]
    return np.array([float(w @ x[i]) / n for i in range(n)])
