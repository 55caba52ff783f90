#!/usr/bin/env python3
"""End-to-end condensation on a 300-node block-model graph.

Pipeline: expert trajectories on the real graph -> condensation (smoothed
feature init, per-iteration structure solve, multi-step matching updates,
bootstrap regularizer updates) -> test stage. Compared against a stratified
random coreset of the same size. Takes a couple of minutes.
"""

import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import numpy as np

from gcsr.engine import CondenseConfig, condense
from gcsr.evaluation import random_coreset, test_stage
from gcsr.models import TrainConfig
from gcsr.sbm import sbm_dataset
from gcsr.trajectory import generate_expert_trajectories

dataset = sbm_dataset(
    num_nodes=300, num_classes=3, intra_p=0.3, inter_p=0.02,
    feature_dim=16, center_scale=1.0, noise_scale=8.0, train_frac=0.3, seed=11,
)
print(f"original graph: {dataset.num_nodes} nodes, {dataset.adjacency.nnz // 2} edges, "
      f"noisy {dataset.num_features}-d features")

t0 = time.time()
buffer = generate_expert_trajectories(
    dataset, arch="sgc",
    cfg=TrainConfig(learning_rate=0.01, weight_decay=5e-4, epochs=200, seed=100),
    num_experts=10, hidden=256,
)
print(f"expert trajectories: {buffer.num_experts} x {buffer.num_steps} steps "
      f"({time.time() - t0:.1f}s)")

t0 = time.time()
cfg = CondenseConfig(ratio=0.1, outer_iterations=200, seed=0)
condensed, losses = condense(dataset, buffer, cfg)
print(f"condensed to {condensed.num_nodes} nodes in {time.time() - t0:.1f}s; "
      f"matching loss {np.mean(losses[:20]):.4f} -> {np.mean(losses[-20:]):.4f}")

report = test_stage(condensed, dataset, arch="gcn", repeats=10, seed=0)
print(f"\ncondensed graph : GCN test accuracy {report.mean:.3f} +- {report.std:.3f}")

# coreset quality swings wildly with the draw, so average a few
core_means = []
for seed in range(5):
    coreset = random_coreset(dataset, 0.1, seed=seed)
    core_means.append(test_stage(coreset, dataset, arch="gcn", repeats=10, seed=seed).mean)
print(f"random coresets : GCN test accuracy {np.mean(core_means):.3f} "
      f"(5 draws: {', '.join(f'{m:.2f}' for m in core_means)})")

for arch in ("sgc", "mlp"):
    cross = test_stage(condensed, dataset, arch=arch, repeats=5, seed=0)
    print(f"condensed -> {arch}: test accuracy {cross.mean:.3f} +- {cross.std:.3f}")
