"""Built-in differentiable classifier (flatten -> dense -> relu -> dense
-> softmax) with hand-derived input gradients, SGD training, and the
FGSM / PGD adversarial example generators.

The two-layer MLP stands in for large pretrained CNNs: gradients are
exact and training takes seconds, which is what the frequency study and
the attack harness need at desk scale.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .core import clip01, load_raw_tensor, make_rng, save_raw_tensor

HIDDEN_UNITS = 64
CHECKPOINT_FORMAT = "freqattack-mlp-v1"


@dataclass
class MlpModel:
    w1: np.ndarray  # (d_in, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, K)
    b2: np.ndarray  # (K,)
    input_shape: tuple
    num_classes: int
    seed: int

    @property
    def d_in(self):
        return int(np.prod(self.input_shape))

    def params(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}


@dataclass(frozen=True)
class FgsmConfig:
    epsilon: float = 0.03  # L-inf budget in pixel units; 0 degenerates to identity

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")


@dataclass(frozen=True)
class PgdConfig:
    epsilon: float = 0.03
    alpha: float | None = None  # default epsilon / 4
    steps: int = 10

    def __post_init__(self):
        if self.alpha is None:
            object.__setattr__(self, "alpha", self.epsilon / 4.0)
        if self.epsilon <= 0 or self.alpha <= 0 or self.steps <= 0:
            raise ValueError("epsilon, alpha and steps must be positive")
        if self.alpha > self.epsilon:
            raise ValueError("alpha must not exceed epsilon")


def init_model(input_shape, num_classes, seed, hidden=HIDDEN_UNITS):
    """He-scaled Gaussian init, deterministic in the seed."""
    rng = make_rng(seed)
    d_in = int(np.prod(input_shape))
    w1 = rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, num_classes))
    b2 = np.zeros(num_classes)
    return MlpModel(w1, b1, w2, b2, tuple(input_shape), num_classes, seed)


def _check_input(model, x):
    x = np.asarray(x, dtype=np.float64)
    if tuple(x.shape) != tuple(model.input_shape):
        raise ValueError(f"input shape {x.shape} != model input {model.input_shape}")
    return x.reshape(-1)


def _softmax(z):
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _forward_flat(model, flat):
    # flat: (N, d_in)
    z1 = flat @ model.w1 + model.b1
    h = np.maximum(z1, 0.0)
    z2 = h @ model.w2 + model.b2
    return z1, h, _softmax(z2)


def forward(model, x):
    """Class probability vector for a single image."""
    if not all(np.all(np.isfinite(p)) for p in model.params().values()):
        raise ValueError("model parameters contain non-finite values")
    flat = _check_input(model, x)
    _, _, p = _forward_flat(model, flat[None, :])
    return p[0]


def forward_batch(model, xs):
    flat = np.asarray(xs, dtype=np.float64).reshape(len(xs), -1)
    if flat.shape[1] != model.d_in:
        raise ValueError("batch input size mismatch")
    _, _, p = _forward_flat(model, flat)
    return p


def cross_entropy(probs, labels):
    return float(np.mean(-np.log(probs[np.arange(len(labels)), labels] + 1e-300)))


def input_gradient(model, x, y):
    """Exact gradient of the cross-entropy loss w.r.t. the input pixels,
    backpropagated through both dense layers (relu subgradient 0 at 0)."""
    if not 0 <= y < model.num_classes:
        raise ValueError(f"label {y} outside [0, {model.num_classes})")
    flat = _check_input(model, x)
    z1, h, p = _forward_flat(model, flat[None, :])
    dz2 = p.copy()
    dz2[0, y] -= 1.0
    dh = dz2 @ model.w2.T
    dz1 = dh * (z1 > 0.0)
    dx = dz1 @ model.w1.T
    return dx[0].reshape(model.input_shape)


def accuracy(model, dataset):
    probs = forward_batch(model, dataset.images)
    return float(np.mean(np.argmax(probs, axis=1) == dataset.labels))


def train(model, dataset, epochs, lr, rng, batch_size=32):
    """Minibatch SGD on cross-entropy.  Returns the trained model and the
    per-epoch training accuracy history."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    if lr < 0:
        raise ValueError("lr must be nonnegative")
    w1, b1 = model.w1.copy(), model.b1.copy()
    w2, b2 = model.w2.copy(), model.b2.copy()
    flat_all = dataset.images.reshape(len(dataset), -1)
    labels = dataset.labels
    history = []
    m = MlpModel(w1, b1, w2, b2, model.input_shape, model.num_classes, model.seed)
    for _ in range(epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(dataset), batch_size):
            idx = order[start : start + batch_size]
            flat = flat_all[idx]
            yb = labels[idx]
            z1 = flat @ w1 + b1
            h = np.maximum(z1, 0.0)
            p = _softmax(h @ w2 + b2)
            dz2 = p
            dz2[np.arange(len(idx)), yb] -= 1.0
            dz2 /= len(idx)
            dw2 = h.T @ dz2
            db2 = dz2.sum(axis=0)
            dh = dz2 @ w2.T
            dz1 = dh * (z1 > 0.0)
            dw1 = flat.T @ dz1
            db1 = dz1.sum(axis=0)
            w1 -= lr * dw1
            b1 -= lr * db1
            w2 -= lr * dw2
            b2 -= lr * db2
        history.append(accuracy(m, dataset))
    return m, history


def fgsm(model, x, y, cfg=FgsmConfig()):
    """Single-step sign attack: clip01(x + eps * sign(grad))."""
    grad = input_gradient(model, x, y)
    return clip01(np.asarray(x, dtype=np.float64) + cfg.epsilon * np.sign(grad))


def pgd(model, x, y, cfg=PgdConfig()):
    """Iterated sign attack projected onto the L-inf ball around x.

    Each step: clip01(x_t + alpha * sign(grad)), then coordinate-wise
    clamp to [x0 - eps, x0 + eps].  Starts at x (no random init).
    """
    x0 = np.asarray(x, dtype=np.float64)
    lo = x0 - cfg.epsilon
    hi = x0 + cfg.epsilon
    xt = x0.copy()
    for _ in range(cfg.steps):
        grad = input_gradient(model, xt, y)
        xt = clip01(xt + cfg.alpha * np.sign(grad))
        xt = np.minimum(np.maximum(xt, lo), hi)
    return xt


def save_checkpoint(dirpath, model):
    """Portable checkpoint: JSON manifest + raw-tensor parameter files."""
    os.makedirs(dirpath, exist_ok=True)
    params = model.params()
    manifest = {
        "format": CHECKPOINT_FORMAT,
        "input_shape": list(model.input_shape),
        "num_classes": int(model.num_classes),
        "hidden": int(model.w1.shape[1]),
        "seed": int(model.seed),
        "params": {name: f"{name}.rt" for name in params},
    }
    for name, arr in params.items():
        save_raw_tensor(os.path.join(dirpath, f"{name}.rt"), arr)
    with open(os.path.join(dirpath, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_checkpoint(dirpath):
    with open(os.path.join(dirpath, "manifest.json")) as fh:
        manifest = json.load(fh)
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{dirpath}: not a {CHECKPOINT_FORMAT} checkpoint")
    params = {
        name: load_raw_tensor(os.path.join(dirpath, fname))
        for name, fname in manifest["params"].items()
    }
    return MlpModel(
        params["w1"],
        params["b1"],
        params["w2"],
        params["b2"],
        tuple(manifest["input_shape"]),
        int(manifest["num_classes"]),
        int(manifest["seed"]),
    )
