"""Initialization of synthetic labels, features, and the structure prior.

Labels are apportioned so the synthetic class distribution tracks the
original one. Features are drawn from the k-hop smoothed feature matrix
(message-passing initialization), so structure information is folded into
the starting point at no cost. The structure prior is a probabilistic
adjacency built from observed edge-type frequencies.
"""

from dataclasses import dataclass

import numpy as np

from .data import normalize_adjacency, propagate
from .errors import (
    DegenerateStructureError,
    InfeasibleSizeError,
    SamplingInfeasibleError,
    ValidationError,
)


@dataclass(frozen=True)
class SyntheticLabels:
    """Synthetic label vector (class-contiguous, ascending) and its counts."""

    labels: np.ndarray
    per_class_counts: np.ndarray

    @property
    def size(self):
        return int(self.labels.size)


def allocate_labels(labels, num_classes, target_size):
    """Largest-remainder apportionment of `target_size` nodes across classes.

    Remainder ties break toward the lower class index. Any class floored to
    zero is raised to one, taking from the class with the largest count, so
    every class keeps at least one synthetic node.
    """
    if target_size < num_classes:
        raise InfeasibleSizeError(
            f"target size {target_size} cannot cover {num_classes} classes"
        )
    y = np.asarray(labels)
    if y.size == 0:
        raise ValidationError("empty label vector")
    counts = np.bincount(y, minlength=num_classes).astype(np.float64)
    quotas = target_size * counts / counts.sum()
    alloc = np.floor(quotas).astype(np.int64)
    remainders = quotas - alloc
    leftover = target_size - int(alloc.sum())
    # stable sort on -remainder keeps lower class indices first on ties
    order = np.argsort(-remainders, kind="stable")
    alloc[order[:leftover]] += 1
    while (alloc == 0).any():
        alloc[int(np.argmax(alloc == 0))] += 1
        alloc[int(np.argmax(alloc))] -= 1
    syn = np.repeat(np.arange(num_classes), alloc)
    return SyntheticLabels(labels=syn, per_class_counts=alloc)


def init_features(dataset, k, syn_labels, seed):
    """Sample synthetic features from the k-hop smoothed feature matrix.

    For each class the required number of rows is drawn uniformly without
    replacement from the train-mask nodes of that class; rows are stacked
    class-contiguously to line up with `syn_labels.labels`. With k = 0 the
    raw features are sampled instead (no message passing).
    """
    rng = np.random.default_rng(seed)
    if k == 0:
        smoothed = dataset.features
    else:
        norm_adj = normalize_adjacency(dataset.adjacency, add_self_loops=True)
        smoothed = propagate(norm_adj, dataset.features, k).matrix
    train_idx = np.flatnonzero(dataset.train_mask)
    rows = []
    for c, want in enumerate(syn_labels.per_class_counts):
        pool = train_idx[dataset.labels[train_idx] == c]
        if pool.size < want:
            raise SamplingInfeasibleError(
                f"class {c} has {pool.size} train nodes, need {int(want)}"
            )
        chosen = rng.choice(pool, size=int(want), replace=False)
        rows.append(smoothed[chosen])
    return np.vstack(rows)


def class_correlation(dataset):
    """C x C matrix of edge-type frequencies.

    Row c is the empirical distribution of the classes on the far end of
    edges leaving class c. Classes with no incident edge get a uniform row.
    """
    coo = dataset.adjacency.tocoo()
    if coo.nnz == 0:
        raise DegenerateStructureError("graph has no edges")
    c = dataset.num_classes
    numer = np.zeros((c, c))
    np.add.at(numer, (dataset.labels[coo.row], dataset.labels[coo.col]), coo.data)
    denom = numer.sum(axis=1)
    out = np.full((c, c), 1.0 / c)
    nonzero = denom > 0
    out[nonzero] = numer[nonzero] / denom[nonzero, None]
    return out


def structure_prior(correlation, syn_labels):
    """Probabilistic synthetic adjacency: entry (i, j) looks up the
    correlation between the classes of synthetic nodes i and j."""
    corr = np.asarray(correlation, dtype=np.float64)
    y = syn_labels.labels
    if y.max() >= corr.shape[0]:
        raise ValidationError("synthetic labels exceed correlation matrix size")
    return corr[np.ix_(y, y)].copy()
