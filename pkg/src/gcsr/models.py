"""Linear and two-layer graph models with exact analytic gradients.

Three architectures share the same two-matrix parameterization
(W1: d x h, W2: h x C):

    sgc   logits = (A_hat^k X) W1 W2          no nonlinearity
    gcn   logits = A_hat relu(A_hat X W1) W2
    mlp   logits = relu(X W1) W2              adjacency ignored

Training is full-batch with masked mean cross-entropy plus an L2 penalty
0.5 * weight_decay * sum ||W||_F^2, so the gradient carries the familiar
weight_decay * W term. Everything is float64 and deterministic.
"""

import json
from dataclasses import dataclass

import numpy as np

from .data import propagate
from .errors import (
    DivergenceError,
    EmptyMaskError,
    FormatError,
    ShapeError,
    ValidationError,
)

ARCHS = ("sgc", "gcn", "mlp")
OPTIMIZERS = ("sgd", "adam")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class ModelParams:
    """Weight matrices for one model; value-semantic via .copy()."""

    arch: str
    layers: list

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValidationError(f"unknown architecture {self.arch!r}")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.shape[1] != b.shape[0]:
                raise ShapeError(f"layer shapes do not chain: {a.shape} -> {b.shape}")

    @property
    def shapes(self):
        return [w.shape for w in self.layers]

    def copy(self):
        return ModelParams(self.arch, [w.copy() for w in self.layers])

    def flatten(self):
        return np.concatenate([w.ravel() for w in self.layers])

    @classmethod
    def from_flat(cls, arch, shapes, flat):
        layers, pos = [], 0
        for shape in shapes:
            size = int(np.prod(shape))
            layers.append(flat[pos : pos + size].reshape(shape).copy())
            pos += size
        if pos != flat.size:
            raise ShapeError("flat vector length does not match shapes")
        return cls(arch, layers)


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 600
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValidationError("weight_decay must be nonnegative")
        if self.optimizer not in OPTIMIZERS:
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")


def init_params(arch, num_features, num_classes, hidden=256, seed=0):
    """Seeded uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer."""
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in ((num_features, hidden), (hidden, num_classes)):
        bound = 1.0 / np.sqrt(fan_in)
        layers.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    return ModelParams(arch, layers)


def forward(params, norm_adj, features, k=2):
    """Logits for all nodes. `norm_adj` may be None for the mlp."""
    x = np.asarray(features, dtype=np.float64)
    w1, w2 = params.layers
    if x.shape[1] != w1.shape[0]:
        raise ShapeError(f"features have {x.shape[1]} columns, W1 expects {w1.shape[0]}")
    if params.arch == "sgc":
        h = x if norm_adj is None else propagate(norm_adj, x, k).matrix
        return h @ w1 @ w2
    if params.arch == "gcn":
        a = norm_adj.matrix
        if a.shape[1] != x.shape[0]:
            raise ShapeError("adjacency and features disagree on node count")
        h1 = np.maximum(a @ x @ w1, 0.0)
        return np.asarray(a @ h1 @ w2)
    h1 = np.maximum(x @ w1, 0.0)
    return h1 @ w2


def loss_and_grad(params, norm_adj, features, labels, mask, k=2, weight_decay=0.0):
    """Masked mean cross-entropy (+ L2 penalty) and its exact gradient.

    Returns (loss, [gW1, gW2]).
    """
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise EmptyMaskError("mask selects no node")
    x = np.asarray(features, dtype=np.float64)
    w1, w2 = params.layers

    if params.arch == "sgc":
        h = x if norm_adj is None else propagate(norm_adj, x, k).matrix
        hidden = h @ w1
        logits = hidden @ w2
    elif params.arch == "gcn":
        ax = norm_adj.matrix @ x
        pre1 = ax @ w1
        h1 = np.maximum(pre1, 0.0)
        ah1 = norm_adj.matrix @ h1
        logits = ah1 @ w2
    else:
        pre1 = x @ w1
        h1 = np.maximum(pre1, 0.0)
        logits = h1 @ w2

    probs, data_loss = _softmax_xent(logits[idx], labels[idx])
    penalty = 0.5 * weight_decay * sum(float(np.sum(w * w)) for w in params.layers)
    loss = data_loss + penalty

    g_full = np.zeros_like(logits)
    probs[np.arange(idx.size), labels[idx]] -= 1.0
    g_full[idx] = probs / idx.size

    if params.arch == "sgc":
        g_w2 = hidden.T @ g_full
        g_w1 = h.T @ (g_full @ w2.T)
    elif params.arch == "gcn":
        ag = norm_adj.matrix @ g_full  # A_hat is symmetric
        g_w2 = h1.T @ ag
        d_pre1 = (ag @ w2.T) * (pre1 > 0)
        g_w1 = ax.T @ d_pre1
    else:
        g_w2 = h1.T @ g_full
        d_pre1 = (g_full @ w2.T) * (pre1 > 0)
        g_w1 = x.T @ d_pre1

    if weight_decay:
        g_w1 = g_w1 + weight_decay * w1
        g_w2 = g_w2 + weight_decay * w2
    return loss, [np.asarray(g_w1), np.asarray(g_w2)]


def _softmax_xent(logits, labels):
    shifted = logits - logits.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    probs = expv / expv.sum(axis=1, keepdims=True)
    logp = shifted - np.log(expv.sum(axis=1, keepdims=True))
    loss = -float(np.mean(logp[np.arange(labels.size), labels]))
    return probs, loss


def train(dataset_view, params0, cfg, k=2):
    """Full-batch training that records a checkpoint at every epoch.

    Parameters
    ----------
    dataset_view : (norm_adj, features, labels, mask)
        `norm_adj` may be None for the mlp architecture.
    params0 : ModelParams
        Starting point; checkpoint 0 is a copy of it.
    cfg : TrainConfig

    Returns
    -------
    (final_params, checkpoints, losses)
        len(checkpoints) == cfg.epochs + 1, len(losses) == cfg.epochs.
    """
    norm_adj, features, labels, mask = dataset_view
    # SGC propagation is constant across epochs: fold it into the features.
    if params0.arch == "sgc":
        features = propagate(norm_adj, features, k).matrix
        norm_adj, k = None, 0

    params = params0.copy()
    checkpoints = [params.copy()]
    losses = []
    m = [np.zeros_like(w) for w in params.layers]
    v = [np.zeros_like(w) for w in params.layers]
    for epoch in range(cfg.epochs):
        loss, grads = loss_and_grad(
            params, norm_adj, features, labels, mask, k=k, weight_decay=cfg.weight_decay
        )
        if not np.isfinite(loss):
            raise DivergenceError(f"non-finite loss at epoch {epoch}", step=epoch)
        if cfg.optimizer == "sgd":
            for w, g in zip(params.layers, grads):
                w -= cfg.learning_rate * g
        else:
            t = epoch + 1
            for i, (w, g) in enumerate(zip(params.layers, grads)):
                m[i] = ADAM_BETA1 * m[i] + (1 - ADAM_BETA1) * g
                v[i] = ADAM_BETA2 * v[i] + (1 - ADAM_BETA2) * g * g
                m_hat = m[i] / (1 - ADAM_BETA1**t)
                v_hat = v[i] / (1 - ADAM_BETA2**t)
                w -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        losses.append(loss)
        checkpoints.append(params.copy())
    return params, checkpoints, losses


def evaluate(params, norm_adj, features, labels, mask, k=2):
    """Masked accuracy; argmax ties break toward the lowest class index."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise EmptyMaskError("mask selects no node")
    logits = forward(params, norm_adj, features, k=k)
    pred = np.argmax(logits[idx], axis=1)
    return float(np.mean(pred == labels[idx]))


# ---------------------------------------------------------------------------
# Checkpoint files: one JSON header line, then raw little-endian float64
# ---------------------------------------------------------------------------


def save_checkpoint(params, path, epoch=0, seed=0):
    header = {
        "arch": params.arch,
        "shapes": [list(s) for s in params.shapes],
        "epoch": int(epoch),
        "seed": int(seed),
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode())
        fh.write(b"\n")
        for w in params.layers:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line.decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"bad checkpoint header in {path}: {exc}") from exc
        layers = []
        for shape in header["shapes"]:
            size = int(np.prod(shape)) * 8
            buf = fh.read(size)
            if len(buf) != size:
                raise FormatError(f"truncated checkpoint payload in {path}")
            layers.append(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
    return ModelParams(header["arch"], layers), header
