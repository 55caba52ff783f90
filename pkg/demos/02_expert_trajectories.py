#!/usr/bin/env python3
"""Train expert models on the real graph and sample trajectory segments.

The condensation loop never touches the real graph directly during its
inner optimization; it only sees (theta_t, theta_{t+m}) pairs drawn from
these trajectories.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import numpy as np

from gcsr.data import load_dataset, normalize_adjacency
from gcsr.models import TrainConfig, evaluate
from gcsr.trajectory import generate_expert_trajectories, sample_segment

here = os.path.dirname(os.path.abspath(__file__))
dataset = load_dataset(os.path.join(here, "..", "data", "toy30"))

cfg = TrainConfig(learning_rate=0.01, weight_decay=5e-4, epochs=60, optimizer="adam", seed=0)
buffer = generate_expert_trajectories(dataset, arch="sgc", cfg=cfg, num_experts=4, hidden=32)
print(f"{buffer.num_experts} experts, {buffer.num_steps} steps each, "
      f"arch={buffer.arch}, fingerprint={buffer.dataset_fingerprint[:12]}...")

norm = normalize_adjacency(dataset.adjacency)
for e, traj in enumerate(buffer.trajectories):
    first = evaluate(traj[0], norm, dataset.features, dataset.labels, dataset.test_mask, k=2)
    last = evaluate(traj[-1], norm, dataset.features, dataset.labels, dataset.test_mask, k=2)
    print(f"expert {e}: test accuracy {first:.2f} -> {last:.2f}")

# Segments are uniform over (expert, start) pairs; the displacement
# theta_end - theta_start is the quantity the student will be asked to match.
rng = np.random.default_rng(7)
print("\nsampled segments (m=1):")
for _ in range(5):
    start, end, t, e = sample_segment(buffer, 1, rng)
    move = np.linalg.norm(end.flatten() - start.flatten())
    print(f"  expert {e}, t={t:3d}: ||theta_end - theta_start|| = {move:.4f}")
