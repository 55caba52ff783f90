"""Test-stage training, quality metrics, and the random coreset baseline.

The test stage trains fresh models on a condensed graph and scores them on
the original test mask, using the original graph's normalized adjacency and
features. Structure quality is measured with the cross-class neighborhood
similarity matrix (CCNS); feature quality with the average silhouette
coefficient.
"""

import json
import os
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .data import normalize_adjacency
from .engine import CondensedGraph
from .errors import (
    DivergenceError,
    NumericError,
    UndefinedMetricError,
    ValidationError,
)
from .initialization import allocate_labels
from .models import TrainConfig, evaluate, init_params, train


@dataclass(frozen=True)
class AccuracyReport:
    accuracies: list
    mean: float
    std: float
    arch: str
    epochs: int
    repeats: int
    failures: int = 0

    def as_dict(self):
        return {
            "mean": self.mean,
            "std": self.std,
            "runs": list(self.accuracies),
            "arch": self.arch,
            "epochs": self.epochs,
            "repeats": self.repeats,
            "failures": self.failures,
        }


def test_stage(condensed, dataset, arch="gcn", repeats=10, cfg=None, hidden=256, k=2, seed=0):
    """Train `repeats` fresh models on the condensed graph, score on the
    original test mask.

    Runs that diverge are excluded from the mean/std but counted and
    reported via a warning, so a flaky condensed graph stays visible.
    """
    if condensed.num_features != dataset.num_features:
        raise ValidationError(
            f"condensed features have {condensed.num_features} dims, "
            f"dataset has {dataset.num_features}"
        )
    cfg = cfg or TrainConfig(learning_rate=0.01, weight_decay=5e-4, epochs=600, optimizer="adam")
    syn_adj = normalize_adjacency(condensed.adjacency, add_self_loops=True)
    syn_mask = np.ones(condensed.num_nodes, dtype=bool)
    orig_adj = normalize_adjacency(dataset.adjacency, add_self_loops=True)

    accuracies = []
    failures = 0
    for r in range(repeats):
        params0 = init_params(
            arch, dataset.num_features, dataset.num_classes, hidden=hidden, seed=seed + r
        )
        try:
            params, _, _ = train(
                (syn_adj, condensed.features, condensed.labels.labels, syn_mask),
                params0,
                cfg,
                k=k,
            )
        except DivergenceError as exc:
            failures += 1
            warnings.warn(f"test-stage run {r} diverged and was excluded: {exc}")
            continue
        accuracies.append(
            evaluate(params, orig_adj, dataset.features, dataset.labels, dataset.test_mask, k=k)
        )
    if not accuracies:
        raise NumericError("every test-stage run diverged")
    return AccuracyReport(
        accuracies=accuracies,
        mean=float(np.mean(accuracies)),
        std=float(np.std(accuracies)),
        arch=arch,
        epochs=cfg.epochs,
        repeats=repeats,
        failures=failures,
    )


def ccns(adjacency, labels, num_classes):
    """Cross-class neighborhood similarity matrix.

    Entry (c, c') is the average cosine similarity between the
    neighbor-label distribution vectors of node pairs (u in class c,
    v in class c', u != v). Weighted adjacencies contribute their edge
    weights to the distributions. Nodes without any neighbor mass are
    skipped (with a warning); a class whose nodes are all isolated is an
    error. Classes with a single node take the convention s(c, c) = 1.
    """
    y = np.asarray(labels)
    onehot = np.zeros((y.size, num_classes))
    onehot[np.arange(y.size), y] = 1.0
    a = adjacency.toarray() if sp.issparse(adjacency) else np.asarray(adjacency, dtype=np.float64)
    dist = a @ onehot
    norms = np.linalg.norm(dist, axis=1)
    isolated = norms == 0
    if isolated.any():
        warnings.warn(f"{int(isolated.sum())} isolated nodes skipped in ccns")
    for c in range(num_classes):
        if not ((y == c) & ~isolated).any():
            raise ValidationError(f"class {c} has zero non-isolated nodes")

    unit = dist[~isolated] / norms[~isolated, None]
    yk = y[~isolated]
    class_sums = np.zeros((num_classes, num_classes))
    class_counts = np.zeros(num_classes)
    for c in range(num_classes):
        members = unit[yk == c]
        class_sums[c] = members.sum(axis=0)
        class_counts[c] = members.shape[0]

    gram = class_sums @ class_sums.T
    counts = class_counts[:, None] * class_counts[None, :]
    out = gram / counts
    for c in range(num_classes):
        n_c = class_counts[c]
        if n_c > 1:
            # remove the n_c self-pairs (each has cosine exactly 1)
            out[c, c] = (gram[c, c] - n_c) / (n_c * (n_c - 1))
        else:
            out[c, c] = 1.0
    return np.clip(out, 0.0, 1.0)


def silhouette(features, labels):
    """Average silhouette coefficient with Euclidean distances.

    Per point, s = (b - a) / max(a, b) where a is the mean distance to the
    point's own class and b the smallest mean distance to another class.
    Singleton-class points contribute 0, as do points with a = b = 0.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    classes = np.unique(y)
    if classes.size < 2:
        raise UndefinedMetricError("silhouette needs at least two classes")
    dists = cdist(x, x)
    scores = np.zeros(y.size)
    for i in range(y.size):
        same = (y == y[i]) & (np.arange(y.size) != i)
        if not same.any():
            continue  # singleton cluster contributes 0
        a = dists[i, same].mean()
        b = min(dists[i, y == c].mean() for c in classes if c != y[i])
        top = max(a, b)
        if top > 0:
            scores[i] = (b - a) / top
    return float(scores.mean())


def random_coreset(dataset, r, seed):
    """Stratified random coreset: real feature rows plus the induced
    original subgraph, with the same class allocation as condensation."""
    if not 0.0 < r < 1.0:
        raise ValidationError("ratio must be in (0,1)")
    rng = np.random.default_rng(seed)
    target = max(dataset.num_classes, int(round(r * dataset.num_nodes)))
    syn_labels = allocate_labels(dataset.labels, dataset.num_classes, target)
    train_idx = np.flatnonzero(dataset.train_mask)
    selected = []
    for c, want in enumerate(syn_labels.per_class_counts):
        pool = train_idx[dataset.labels[train_idx] == c]
        if pool.size < want:
            raise ValidationError(f"class {c} has {pool.size} train nodes, need {int(want)}")
        selected.append(rng.choice(pool, size=int(want), replace=False))
    selected = np.concatenate(selected)
    sub = dataset.adjacency[selected][:, selected].toarray()
    return CondensedGraph(
        features=dataset.features[selected].copy(),
        adjacency=sub,
        labels=syn_labels,
        ratio=r,
        provenance={
            "source": "random_coreset",
            "seed": seed,
            "dataset_fingerprint": dataset.fingerprint(),
            "selected_nodes": selected.tolist(),
        },
    )


# ---------------------------------------------------------------------------
# Report files
# ---------------------------------------------------------------------------


def metrics_report(accuracy_report, ccns_matrix, silhouette_value, config):
    return {
        "accuracy": accuracy_report.as_dict() if accuracy_report is not None else None,
        "ccns": ccns_matrix.tolist() if ccns_matrix is not None else None,
        "silhouette": silhouette_value,
        "config": config,
    }


def write_metrics_report(report, path):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_ccns_csv(ccns_matrix, path):
    """Per-class CCNS rows: class index then one column per class."""
    c = ccns_matrix.shape[0]
    with open(path, "w") as fh:
        fh.write("class," + ",".join(f"class_{j}" for j in range(c)) + "\n")
        for i in range(c):
            fh.write(f"{i}," + ",".join(f"{v!r}" for v in ccns_matrix[i]) + "\n")


def write_features_csv(features, labels, path):
    """Feature rows with a leading label column, for external plotting."""
    with open(path, "w") as fh:
        fh.write("label," + ",".join(f"f{j}" for j in range(features.shape[1])) + "\n")
        for y, row in zip(labels, features):
            fh.write(f"{int(y)}," + ",".join(f"{v!r}" for v in row) + "\n")
