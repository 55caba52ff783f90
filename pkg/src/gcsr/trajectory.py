"""Expert parameter trajectories: generation, storage, and segment sampling.

An expert run is the full per-epoch checkpoint sequence of one model trained
on the real dataset. Segments (checkpoint at step t, checkpoint at step
t + m) are sampled uniformly over (expert, t) pairs and consumed by the
condensation loop.
"""

import json
import os
from dataclasses import asdict, dataclass

from .data import normalize_adjacency
from .errors import (
    DivergenceError,
    FormatError,
    SegmentTooLongError,
    ValidationError,
)
from .models import TrainConfig, init_params, load_checkpoint, save_checkpoint, train


@dataclass
class TrajectoryBuffer:
    """Checkpoints of independently seeded expert runs on one dataset."""

    arch: str
    trajectories: list  # list of checkpoint lists, each len epochs + 1
    train_config: TrainConfig
    dataset_fingerprint: str
    propagation_k: int
    hidden: int
    seeds: list

    def __post_init__(self):
        if not self.trajectories:
            raise ValidationError("buffer must hold at least one trajectory")
        shapes = self.trajectories[0][0].shapes
        for traj in self.trajectories:
            if len(traj) < 2:
                raise ValidationError("every trajectory needs at least 2 checkpoints")
            for ckpt in traj:
                if ckpt.shapes != shapes:
                    raise ValidationError("checkpoint shapes differ within the buffer")

    @property
    def num_experts(self):
        return len(self.trajectories)

    @property
    def num_steps(self):
        """Steps per trajectory (checkpoints minus one)."""
        return min(len(traj) - 1 for traj in self.trajectories)


def generate_expert_trajectories(
    dataset, arch="sgc", cfg=None, num_experts=10, hidden=256, k=2
):
    """Train `num_experts` models on the dataset, keeping every checkpoint.

    Runs use seeds cfg.seed, cfg.seed + 1, ... so inits differ while the
    whole buffer stays reproducible. Inductive datasets are restricted to
    their train subgraph first.
    """
    if num_experts < 1:
        raise ValidationError("num_experts must be >= 1")
    cfg = cfg or TrainConfig(learning_rate=0.01, weight_decay=5e-4, epochs=200, optimizer="adam")
    view = dataset.train_view()
    norm_adj = normalize_adjacency(view.adjacency, add_self_loops=True)
    data_view = (norm_adj, view.features, view.labels, view.train_mask)

    trajectories, seeds = [], []
    for e in range(num_experts):
        seed = cfg.seed + e
        params0 = init_params(arch, view.num_features, view.num_classes, hidden=hidden, seed=seed)
        try:
            _, checkpoints, _ = train(data_view, params0, cfg, k=k)
        except DivergenceError as exc:
            raise DivergenceError(f"expert {e} diverged: {exc}", step=exc.step) from exc
        trajectories.append(checkpoints)
        seeds.append(seed)
    return TrajectoryBuffer(
        arch=arch,
        trajectories=trajectories,
        train_config=cfg,
        dataset_fingerprint=dataset.fingerprint(),
        propagation_k=k,
        hidden=hidden,
        seeds=seeds,
    )


def sample_segment(buffer, m, rng, t_min=0, t_max=None):
    """Draw (theta_t, theta_{t+m}, t, expert) uniformly over valid pairs.

    `t` ranges over [t_min, min(T - m, t_max)] where T is the number of
    training steps in a trajectory.
    """
    if m < 1:
        raise ValidationError("segment length m must be >= 1")
    if m > buffer.num_steps:
        raise SegmentTooLongError(
            f"segment length {m} exceeds shortest trajectory ({buffer.num_steps} steps)"
        )
    pairs = []
    for e, traj in enumerate(buffer.trajectories):
        hi = len(traj) - 1 - m
        if t_max is not None:
            hi = min(hi, t_max)
        for t in range(t_min, hi + 1):
            pairs.append((e, t))
    if not pairs:
        raise SegmentTooLongError("sampling window admits no (expert, t) pair")
    e, t = pairs[rng.integers(len(pairs))]
    traj = buffer.trajectories[e]
    return traj[t].copy(), traj[t + m].copy(), t, e


# ---------------------------------------------------------------------------
# Buffer directory: buffer_meta.json + one checkpoint file per (expert, epoch)
# ---------------------------------------------------------------------------


def save_buffer(buffer, path):
    os.makedirs(path, exist_ok=True)
    meta = {
        "arch": buffer.arch,
        "num_experts": buffer.num_experts,
        "epochs_per_expert": [len(t) - 1 for t in buffer.trajectories],
        "train_config": asdict(buffer.train_config),
        "dataset_fingerprint": buffer.dataset_fingerprint,
        "propagation_k": buffer.propagation_k,
        "hidden": buffer.hidden,
        "seeds": list(buffer.seeds),
    }
    with open(os.path.join(path, "buffer_meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for e, traj in enumerate(buffer.trajectories):
        for t, ckpt in enumerate(traj):
            save_checkpoint(
                ckpt,
                os.path.join(path, f"expert{e:03d}_epoch{t:04d}.ckpt"),
                epoch=t,
                seed=buffer.seeds[e],
            )


def load_buffer(path):
    meta_path = os.path.join(path, "buffer_meta.json")
    if not os.path.isfile(meta_path):
        raise FormatError(f"missing file buffer_meta.json in {path}")
    with open(meta_path) as fh:
        meta = json.load(fh)
    trajectories = []
    for e in range(meta["num_experts"]):
        traj = []
        for t in range(meta["epochs_per_expert"][e] + 1):
            ckpt_path = os.path.join(path, f"expert{e:03d}_epoch{t:04d}.ckpt")
            if not os.path.isfile(ckpt_path):
                raise FormatError(f"missing checkpoint {os.path.basename(ckpt_path)} in {path}")
            params, _ = load_checkpoint(ckpt_path)
            traj.append(params)
        trajectories.append(traj)
    return TrajectoryBuffer(
        arch=meta["arch"],
        trajectories=trajectories,
        train_config=TrainConfig(**meta["train_config"]),
        dataset_fingerprint=meta["dataset_fingerprint"],
        propagation_k=meta["propagation_k"],
        hidden=meta["hidden"],
        seeds=meta["seeds"],
    )
