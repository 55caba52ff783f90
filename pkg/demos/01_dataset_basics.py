#!/usr/bin/env python3
"""Walk through the graph data model: loading, normalization, smoothing.

Uses the bundled 30-node toy dataset. Run from the repository root:

    python demos/01_dataset_basics.py
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import numpy as np

from gcsr.data import class_distribution, load_dataset, normalize_adjacency, propagate

here = os.path.dirname(os.path.abspath(__file__))
dataset = load_dataset(os.path.join(here, "..", "data", "toy30"))

print(f"nodes: {dataset.num_nodes}, features: {dataset.num_features}, "
      f"classes: {dataset.num_classes}, mode: {dataset.mode}")
print(f"edges: {dataset.adjacency.nnz // 2}")
print(f"train/val/test sizes: {dataset.train_mask.sum()}/"
      f"{dataset.val_mask.sum()}/{dataset.test_mask.sum()}")
print(f"class distribution: {np.round(class_distribution(dataset.labels, 3), 3)}")
print(f"content fingerprint: {dataset.fingerprint()[:16]}...")

# Symmetric normalization with self-loops: rows of the operator mix each
# node with its neighborhood.
norm = normalize_adjacency(dataset.adjacency, add_self_loops=True)
mat = norm.matrix.toarray()
print(f"\nnormalized operator: symmetric within {np.abs(mat - mat.T).max():.1e}, "
      f"entries in [{mat.min():.3f}, {mat.max():.3f}]")
print(f"eigenvalues in [{np.linalg.eigvalsh(mat).min():.3f}, "
      f"{np.linalg.eigvalsh(mat).max():.3f}]")

# Feature smoothing: k hops of propagation shrink the within-class spread,
# which is exactly why sampling smoothed rows makes good synthetic features.
for k in (0, 1, 2, 4):
    smoothed = propagate(norm, dataset.features, k).matrix
    spreads = []
    for c in range(dataset.num_classes):
        rows = smoothed[dataset.labels == c]
        spreads.append(np.linalg.norm(rows - rows.mean(axis=0), axis=1).mean())
    print(f"k={k}: mean within-class feature spread {np.mean(spreads):.3f}")
