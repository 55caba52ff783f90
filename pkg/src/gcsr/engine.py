"""The condensation loop.

Each outer iteration re-solves the synthetic structure from the current
synthetic features, samples an expert trajectory segment, unrolls a short
student training run on the synthetic graph, and updates the features so the
student's parameter displacement matches the expert's. The structure prior
and the history matrix then absorb a fraction of the solved structure
(bootstrap updates), which stabilizes the next solve.

The matching loss for a segment starting at theta_t is

    D = ||theta_student_final - theta_expert_end||_F^2
        / ||theta_expert_end - theta_t||_F^2

with the student trained for `inner_steps_n` plain SGD steps from theta_t on
the synthetic graph, and the expert displacement read off the stored
trajectory `expert_steps_m` steps ahead. The gradient of D with respect to
the synthetic features is computed with exact reverse-mode accumulation
through every inner step, including the curvature terms through the inner
cross-entropy gradients. The synthetic adjacency is treated as a constant
inside this derivative; it is re-solved from the updated features on the
next iteration.
"""

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import normalize_adjacency
from .errors import (
    DivergenceError,
    FormatError,
    NumericError,
    ShapeError,
    ValidationError,
    ZeroDenominatorError,
)
from .initialization import (
    SyntheticLabels,
    allocate_labels,
    class_correlation,
    init_features,
    structure_prior,
)
from .models import ADAM_BETA1, ADAM_BETA2, ADAM_EPS, ModelParams
from .selfexpr import SelfExpressiveProblem, solve, symmetrize
from .trajectory import sample_segment

STUDENT_ARCH = "sgc"
MAX_SEGMENT_RESAMPLES = 10


@dataclass
class CondenseConfig:
    """Hyperparameters of the condensation stage."""

    ratio: float = 0.1
    inner_steps_n: int = 20
    expert_steps_m: int = 1
    inner_lr: float = 0.01
    feature_lr: float = 0.01
    alpha: float = 1.0
    beta: float = 1.0
    tau: float = 0.95
    gamma: float = 0.5
    k: int = 2
    init_k: int = None  # feature-init smoothing override; None means use k
    outer_iterations: int = 200
    seed: int = 0
    t_min: int = 0
    t_max: int = None

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ValidationError("ratio must be in (0,1)")
        if self.inner_steps_n < 1:
            raise ValidationError("inner_steps_n must be >= 1")
        if self.expert_steps_m < 1:
            raise ValidationError("expert_steps_m must be >= 1")
        if self.inner_lr < 0 or self.feature_lr < 0:
            raise ValidationError("learning rates must be nonnegative")
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValidationError("alpha, beta must be nonnegative with alpha + beta > 0")
        if not 0.0 <= self.tau <= 1.0:
            raise ValidationError("tau must be in [0,1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError("gamma must be in [0,1]")
        if self.k < 0:
            raise ValidationError("k must be nonnegative")
        if self.init_k is not None and self.init_k < 0:
            raise ValidationError("init_k must be nonnegative")
        if self.outer_iterations < 0:
            raise ValidationError("outer_iterations must be nonnegative")
        if self.t_min < 0:
            raise ValidationError("t_min must be nonnegative")


@dataclass
class RegularizerState:
    """Structure prior, history matrix, and their update rates."""

    prior: np.ndarray
    history: np.ndarray
    tau: float
    gamma: float


def bootstrap_update(state, adjacency):
    """Move prior and history toward the solved adjacency.

    prior   <- tau * prior + (1 - tau) * adjacency
    history <- gamma * history + (1 - gamma) * adjacency

    Rates at the endpoints are honored exactly: tau = 1 leaves the prior
    bit-unchanged, tau = 0 copies the adjacency, and likewise for gamma.
    """
    a = np.asarray(adjacency, dtype=np.float64)
    return RegularizerState(
        prior=_convex(state.tau, state.prior, a),
        history=_convex(state.gamma, state.history, a),
        tau=state.tau,
        gamma=state.gamma,
    )


def _convex(rate, old, new):
    if rate == 1.0:
        return old.copy()
    if rate == 0.0:
        return new.copy()
    return rate * old + (1.0 - rate) * new


@dataclass(frozen=True)
class CondensedGraph:
    """Synthetic features, weighted symmetric adjacency, and fixed labels."""

    features: np.ndarray
    adjacency: np.ndarray
    labels: SyntheticLabels
    ratio: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.labels.size
        if self.features.shape[0] != n:
            raise ShapeError("features and labels disagree on node count")
        if self.adjacency.shape != (n, n):
            raise ShapeError(f"adjacency must be ({n}, {n})")
        if not (self.adjacency == self.adjacency.T).all():
            raise ValidationError("synthetic adjacency is not symmetric")
        if self.adjacency.size and self.adjacency.min() < 0:
            raise ValidationError("synthetic adjacency has negative entries")
        counts = np.bincount(self.labels.labels, minlength=self.labels.per_class_counts.size)
        if not (counts == self.labels.per_class_counts).all():
            raise ValidationError("label vector does not match per-class counts")

    @property
    def num_nodes(self):
        return self.labels.size

    @property
    def num_features(self):
        return self.features.shape[1]


def matching_loss(theta_hat, theta_expert_end, theta_start):
    """Squared student-to-expert endpoint distance over squared expert
    displacement, on flattened parameters."""
    if theta_hat.shapes != theta_expert_end.shapes or theta_hat.shapes != theta_start.shapes:
        raise ShapeError("parameter sets do not share shapes")
    hat = theta_hat.flatten()
    end = theta_expert_end.flatten()
    start = theta_start.flatten()
    denom = float(np.sum((end - start) ** 2))
    if denom == 0.0:
        raise ZeroDenominatorError("expert segment is degenerate (no parameter movement)")
    return float(np.sum((hat - end) ** 2)) / denom


@dataclass
class UnrolledTape:
    """Everything needed to replay the inner run and differentiate through it.

    `propagation` is the dense k-step smoothing operator of the synthetic
    graph; `smoothed` = propagation @ features is the student's effective
    input. Weights are recorded at every step (n + 1 entries), the pre-output
    hidden activations and softmax outputs at every step (n entries).
    """

    propagation: np.ndarray
    smoothed: np.ndarray
    onehot: np.ndarray
    inner_lr: float
    num_steps: int
    k: int
    weights1: list
    weights2: list
    hidden: list
    softmax: list


def _forward_steps(smoothed, onehot, w1, w2, num_steps, lr):
    n_syn = onehot.shape[0]
    weights1, weights2 = [w1.copy()], [w2.copy()]
    hidden, softmax = [], []
    for step in range(num_steps):
        p = smoothed @ w1
        logits = p @ w2
        shifted = logits - logits.max(axis=1, keepdims=True)
        expv = np.exp(shifted)
        smax = expv / expv.sum(axis=1, keepdims=True)
        if not np.isfinite(smax).all():
            raise DivergenceError(f"non-finite student state at inner step {step}", step=step)
        g = (smax - onehot) / n_syn
        g_w1 = smoothed.T @ (g @ w2.T)
        g_w2 = p.T @ g
        w1 = w1 - lr * g_w1
        w2 = w2 - lr * g_w2
        hidden.append(p)
        softmax.append(smax)
        weights1.append(w1.copy())
        weights2.append(w2.copy())
    return weights1, weights2, hidden, softmax


def inner_train_unrolled(theta_start, condensed, n, inner_lr, k=2):
    """Train a student for n plain-SGD steps on the synthetic graph.

    No momentum, no weight decay: each step is an exact, recordable function
    of the previous weights, so the returned tape supports exact reverse-mode
    differentiation of any function of the final weights with respect to the
    synthetic features (the adjacency is held constant).
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    if theta_start.arch != STUDENT_ARCH:
        raise ValidationError(f"student must be {STUDENT_ARCH!r}, got {theta_start.arch!r}")
    w1, w2 = theta_start.layers
    if condensed.num_features != w1.shape[0]:
        raise ShapeError("condensed features and student weights disagree on dimension")

    norm = normalize_adjacency(condensed.adjacency, add_self_loops=True).matrix
    prop = np.eye(condensed.num_nodes)
    for _ in range(k):
        prop = norm @ prop
    smoothed = prop @ condensed.features
    onehot = np.zeros((condensed.num_nodes, w2.shape[1]))
    onehot[np.arange(condensed.num_nodes), condensed.labels.labels] = 1.0

    weights1, weights2, hidden, softmax = _forward_steps(smoothed, onehot, w1, w2, n, inner_lr)
    tape = UnrolledTape(
        propagation=prop,
        smoothed=smoothed,
        onehot=onehot,
        inner_lr=inner_lr,
        num_steps=n,
        k=k,
        weights1=weights1,
        weights2=weights2,
        hidden=hidden,
        softmax=softmax,
    )
    theta_hat = ModelParams(STUDENT_ARCH, [weights1[-1].copy(), weights2[-1].copy()])
    return theta_hat, tape


def replay_tape(tape):
    """Re-run the recorded inner loop; must agree with the tape bit-exactly."""
    weights1, weights2, _, _ = _forward_steps(
        tape.smoothed, tape.onehot, tape.weights1[0], tape.weights2[0], tape.num_steps, tape.inner_lr
    )
    return ModelParams(STUDENT_ARCH, [weights1[-1], weights2[-1]])


def meta_gradient(tape, theta_expert_end, theta_start):
    """d(matching loss) / d(synthetic features), exact through all steps.

    Reverse-mode accumulation over the recorded inner run: the adjoints of
    the student weights are pulled back step by step, picking up the
    second-order terms through each step's cross-entropy gradient, and the
    accumulated adjoint of the smoothed input is mapped back through the
    (constant) propagation operator.
    """
    e1, e2 = theta_expert_end.layers
    s1, s2 = theta_start.layers
    w1_n, w2_n = tape.weights1[-1], tape.weights2[-1]
    if w1_n.shape != e1.shape or w2_n.shape != e2.shape:
        raise ShapeError("expert parameters do not match the tape")
    denom = float(np.sum((e1 - s1) ** 2) + np.sum((e2 - s2) ** 2))
    if denom == 0.0:
        raise ZeroDenominatorError("expert segment is degenerate (no parameter movement)")

    lr = tape.inner_lr
    h = tape.smoothed
    n_syn = tape.onehot.shape[0]
    adj_w1 = 2.0 * (w1_n - e1) / denom
    adj_w2 = 2.0 * (w2_n - e2) / denom
    adj_h = np.zeros_like(h)
    for i in range(tape.num_steps - 1, -1, -1):
        w1, w2 = tape.weights1[i], tape.weights2[i]
        p, smax = tape.hidden[i], tape.softmax[i]
        g = (smax - tape.onehot) / n_syn

        adj_g = -lr * (h @ adj_w1 @ w2 + p @ adj_w2)
        tmp = smax * adj_g
        adj_logits = (tmp - smax * tmp.sum(axis=1, keepdims=True)) / n_syn
        adj_p = -lr * (g @ adj_w2.T) + adj_logits @ w2.T
        adj_h += -lr * (g @ w2.T) @ adj_w1.T + adj_p @ w1.T
        new_adj_w1 = adj_w1 + h.T @ adj_p
        new_adj_w2 = adj_w2 - lr * adj_w1.T @ (h.T @ g) + p.T @ adj_logits
        adj_w1, adj_w2 = new_adj_w1, new_adj_w2
    return tape.propagation.T @ adj_h


def condense(dataset, buffer, cfg):
    """Run the full condensation loop.

    Returns (CondensedGraph, loss_log) where loss_log holds the matching
    loss of every outer iteration. With outer_iterations = 0 the output is
    the initialization with the structure solved once from the initial
    features.
    """
    if buffer.arch != STUDENT_ARCH:
        raise ValidationError(f"buffer architecture {buffer.arch!r} is not {STUDENT_ARCH!r}")
    if buffer.dataset_fingerprint != dataset.fingerprint():
        raise ValidationError("buffer fingerprint does not match the dataset")
    view = dataset.train_view()
    shapes = buffer.trajectories[0][0].shapes
    if shapes[0][0] != view.num_features or shapes[-1][1] != view.num_classes:
        raise ValidationError("buffer checkpoint shapes do not match the dataset")

    rng = np.random.default_rng(cfg.seed)
    target = max(view.num_classes, int(round(cfg.ratio * view.num_nodes)))
    syn_labels = allocate_labels(view.labels, view.num_classes, target)
    init_k = cfg.k if cfg.init_k is None else cfg.init_k
    features = init_features(view, init_k, syn_labels, rng)
    prior = structure_prior(class_correlation(view), syn_labels)
    state = RegularizerState(
        prior=prior, history=np.eye(target), tau=cfg.tau, gamma=cfg.gamma
    )

    adam_m = np.zeros_like(features)
    adam_v = np.zeros_like(features)
    loss_log = []
    adjacency = None
    for it in range(cfg.outer_iterations):
        try:
            coeffs = solve(
                SelfExpressiveProblem(features, state.prior, state.history, cfg.alpha, cfg.beta)
            )
            adjacency = symmetrize(coeffs)
            _check_adjacency(adjacency)
            condensed = CondensedGraph(
                features=features, adjacency=adjacency, labels=syn_labels, ratio=cfg.ratio
            )
            theta_start, theta_end = _sample_moving_segment(buffer, cfg, rng)
            theta_hat, tape = inner_train_unrolled(
                theta_start, condensed, cfg.inner_steps_n, cfg.inner_lr, k=cfg.k
            )
            loss_log.append(matching_loss(theta_hat, theta_end, theta_start))
            grad = meta_gradient(tape, theta_end, theta_start)
        except NumericError as exc:
            raise type(exc)(f"outer iteration {it}: {exc}") from exc

        t = it + 1
        adam_m = ADAM_BETA1 * adam_m + (1 - ADAM_BETA1) * grad
        adam_v = ADAM_BETA2 * adam_v + (1 - ADAM_BETA2) * grad * grad
        m_hat = adam_m / (1 - ADAM_BETA1**t)
        v_hat = adam_v / (1 - ADAM_BETA2**t)
        features = features - cfg.feature_lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        state = bootstrap_update(state, adjacency)

    final_coeffs = solve(
        SelfExpressiveProblem(features, state.prior, state.history, cfg.alpha, cfg.beta)
    )
    adjacency = symmetrize(final_coeffs)
    _check_adjacency(adjacency)
    provenance = {
        "source": "gcsr",
        "seed": cfg.seed,
        "config": asdict(cfg),
        "dataset_fingerprint": dataset.fingerprint(),
        "expert_config": asdict(buffer.train_config),
        "num_experts": buffer.num_experts,
    }
    out = CondensedGraph(
        features=features,
        adjacency=adjacency,
        labels=syn_labels,
        ratio=cfg.ratio,
        provenance=provenance,
    )
    return out, loss_log


def _sample_moving_segment(buffer, cfg, rng):
    """Sample a segment with actual parameter movement, retrying a few times."""
    for _ in range(MAX_SEGMENT_RESAMPLES):
        theta_start, theta_end, _, _ = sample_segment(
            buffer, cfg.expert_steps_m, rng, t_min=cfg.t_min, t_max=cfg.t_max
        )
        if float(np.sum((theta_end.flatten() - theta_start.flatten()) ** 2)) > 0.0:
            return theta_start, theta_end
    raise ZeroDenominatorError(
        f"no expert segment with parameter movement after {MAX_SEGMENT_RESAMPLES} draws"
    )


def _check_adjacency(adjacency):
    if not (adjacency == adjacency.T).all() or (adjacency.size and adjacency.min() < 0):
        raise NumericError("solved adjacency violates symmetry/nonnegativity")


# ---------------------------------------------------------------------------
# Condensed graph directory: condensed_meta.json + X.bin + A.bin + Y.txt
# (+ loss.csv when a loss log is supplied)
# ---------------------------------------------------------------------------


def save_condensed(condensed, path, loss_log=None):
    os.makedirs(path, exist_ok=True)
    meta = {
        "num_nodes": condensed.num_nodes,
        "num_features": condensed.num_features,
        "num_classes": int(condensed.labels.per_class_counts.size),
        "per_class_counts": condensed.labels.per_class_counts.tolist(),
        "ratio": condensed.ratio,
        "provenance": condensed.provenance,
    }
    with open(os.path.join(path, "condensed_meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(path, "X.bin"), "wb") as fh:
        fh.write(np.ascontiguousarray(condensed.features, dtype="<f8").tobytes())
    with open(os.path.join(path, "A.bin"), "wb") as fh:
        fh.write(np.ascontiguousarray(condensed.adjacency, dtype="<f8").tobytes())
    with open(os.path.join(path, "Y.txt"), "w") as fh:
        for y in condensed.labels.labels:
            fh.write(f"{int(y)}\n")
    if loss_log is not None:
        with open(os.path.join(path, "loss.csv"), "w") as fh:
            fh.write("iteration,loss\n")
            for i, value in enumerate(loss_log):
                fh.write(f"{i},{value!r}\n")


def load_condensed(path):
    meta_path = os.path.join(path, "condensed_meta.json")
    if not os.path.isfile(meta_path):
        raise FormatError(f"missing file condensed_meta.json in {path}")
    with open(meta_path) as fh:
        meta = json.load(fh)
    n, d = meta["num_nodes"], meta["num_features"]
    for name in ("X.bin", "A.bin", "Y.txt"):
        if not os.path.isfile(os.path.join(path, name)):
            raise FormatError(f"missing file {name} in {path}")
    features = _read_bin(os.path.join(path, "X.bin"), (n, d))
    adjacency = _read_bin(os.path.join(path, "A.bin"), (n, n))
    labels = np.loadtxt(os.path.join(path, "Y.txt"), dtype=np.int64, ndmin=1)
    syn = SyntheticLabels(
        labels=labels,
        per_class_counts=np.asarray(meta["per_class_counts"], dtype=np.int64),
    )
    return CondensedGraph(
        features=features,
        adjacency=adjacency,
        labels=syn,
        ratio=float(meta["ratio"]),
        provenance=meta.get("provenance", {}),
    )


def _read_bin(path, shape):
    size = int(np.prod(shape)) * 8
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) != size:
        raise FormatError(f"{path} has {len(buf)} bytes, expected {size}")
    return np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
