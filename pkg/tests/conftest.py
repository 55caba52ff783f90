import numpy as np
import pytest
import scipy.sparse as sp

from gcsr.data import GraphDataset
from gcsr.engine import CondenseConfig, condense
from gcsr.models import TrainConfig
from gcsr.sbm import sbm_dataset
from gcsr.trajectory import generate_expert_trajectories

# The desk-scale benchmark: a 3-block SBM whose structure is informative but
# whose raw features are noisy enough that training-data quality matters.
SBM_KWARGS = dict(
    num_nodes=300,
    num_classes=3,
    intra_p=0.3,
    inter_p=0.02,
    feature_dim=16,
    center_scale=1.0,
    noise_scale=8.0,
    train_frac=0.3,
    val_frac=0.2,
    seed=11,
)

BENCH_CONFIG = dict(
    ratio=0.1,
    outer_iterations=200,
    inner_steps_n=20,
    expert_steps_m=1,
    inner_lr=0.01,
    feature_lr=0.01,
    alpha=1.0,
    beta=1.0,
    tau=0.95,
    gamma=0.5,
    k=2,
)


def graph_from_edges(num_nodes, edges, labels, num_classes, train=None, val=(), test=(),
                     features=None, mode="transductive"):
    """Small hand-built dataset; train defaults to all nodes."""
    rows = np.array([u for u, _ in edges] + [v for _, v in edges], dtype=np.int64)
    cols = np.array([v for _, v in edges] + [u for u, _ in edges], dtype=np.int64)
    adjacency = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(num_nodes, num_nodes))
    adjacency.data[:] = 1.0
    if features is None:
        features = np.arange(num_nodes * 2, dtype=np.float64).reshape(num_nodes, 2)
    masks = {}
    for name, idx in (("train", train), ("val", val), ("test", test)):
        m = np.zeros(num_nodes, dtype=bool)
        if name == "train" and idx is None:
            m[:] = True
            m[list(val)] = False
            m[list(test)] = False
        else:
            m[list(idx)] = True
        masks[name] = m
    return GraphDataset(
        num_nodes=num_nodes,
        features=np.asarray(features, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64),
        adjacency=adjacency,
        num_classes=num_classes,
        train_mask=masks["train"],
        val_mask=masks["val"],
        test_mask=masks["test"],
        mode=mode,
    )


@pytest.fixture(scope="session")
def sbm300():
    return sbm_dataset(**SBM_KWARGS)


@pytest.fixture(scope="session")
def buffer300(sbm300):
    cfg = TrainConfig(learning_rate=0.01, weight_decay=5e-4, epochs=200, optimizer="adam", seed=100)
    return generate_expert_trajectories(sbm300, arch="sgc", cfg=cfg, num_experts=10, hidden=256, k=2)


@pytest.fixture(scope="session")
def gcsr_runs300(sbm300, buffer300):
    """Five condensed graphs (seeds 0..4) with their loss logs."""
    runs = []
    for seed in range(5):
        cfg = CondenseConfig(seed=seed, **BENCH_CONFIG)
        runs.append(condense(sbm300, buffer300, cfg))
    return runs


@pytest.fixture(scope="session")
def gcsr_runs300_rawinit(sbm300, buffer300):
    """Same five runs but with raw-feature initialization (no smoothing)."""
    runs = []
    for seed in range(5):
        cfg = CondenseConfig(seed=seed, init_k=0, **BENCH_CONFIG)
        runs.append(condense(sbm300, buffer300, cfg))
    return runs
