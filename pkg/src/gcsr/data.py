"""Graph data model, dataset I/O, normalization, and feature propagation.

A dataset is a directory of plain text files plus a small JSON header:

    meta.json      {"num_nodes": N, "num_features": d,
                    "num_classes": C, "mode": "transductive"|"inductive"}
    edges.tsv      one undirected edge "u<TAB>v" per line, 0-based
    features.csv   N rows of d comma-separated decimals
    labels.txt     N integers, one per line
    masks.json     {"train": [...], "val": [...], "test": [...]}

Everything numeric is float64. The original adjacency is kept as a binary
CSR matrix with zero diagonal; self-loops are only ever added during
normalization.
"""

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (
    DegenerateDegreeError,
    EmptyInputError,
    FormatError,
    ShapeError,
    ValidationError,
)

MODES = ("transductive", "inductive")


@dataclass(frozen=True)
class GraphDataset:
    """An attributed graph with labels and train/val/test masks.

    The adjacency must be symmetric and binary with a zero diagonal; the
    masks must be pairwise disjoint; every class must be represented among
    the train nodes. Instances are treated as immutable after construction.
    """

    num_nodes: int
    features: np.ndarray
    labels: np.ndarray
    adjacency: sp.csr_matrix
    num_classes: int
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    mode: str = "transductive"

    def __post_init__(self):
        n, c = self.num_nodes, self.num_classes
        if n <= 0 or c <= 0:
            raise ValidationError("num_nodes and num_classes must be positive")
        if self.mode not in MODES:
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ShapeError(f"features must be ({n}, d), got {self.features.shape}")
        if self.labels.shape != (n,):
            raise ShapeError(f"labels must have length {n}")
        bad = np.flatnonzero((self.labels < 0) | (self.labels >= c))
        if bad.size:
            raise ValidationError(
                f"label {int(self.labels[bad[0]])} out of range [0, {c}) at node {int(bad[0])}"
            )
        if self.adjacency.shape != (n, n):
            raise ShapeError(f"adjacency must be ({n}, {n})")
        if (self.adjacency != self.adjacency.T).nnz:
            raise ValidationError("adjacency is not symmetric")
        if self.adjacency.diagonal().any():
            raise ValidationError("adjacency has nonzero diagonal entries")
        for name, mask in (("train", self.train_mask), ("val", self.val_mask), ("test", self.test_mask)):
            if mask.shape != (n,) or mask.dtype != np.bool_:
                raise ValidationError(f"{name} mask must be a boolean vector of length {n}")
        if (
            (self.train_mask & self.val_mask).any()
            or (self.train_mask & self.test_mask).any()
            or (self.val_mask & self.test_mask).any()
        ):
            raise ValidationError("masks are not pairwise disjoint")
        present = np.unique(self.labels[self.train_mask])
        missing = np.setdiff1d(np.arange(c), present)
        if missing.size:
            raise ValidationError(f"class {int(missing[0])} has no train-mask node")

    @property
    def num_features(self):
        return self.features.shape[1]

    def train_view(self):
        """Return the graph the condensation stage should read.

        Transductive datasets are used whole (test nodes visible but
        unlabeled); inductive datasets are restricted to the subgraph induced
        by the train mask, whose nodes are then all marked as train.
        """
        if self.mode == "transductive":
            return self
        idx = np.flatnonzero(self.train_mask)
        sub = self.adjacency[idx][:, idx].tocsr()
        n = idx.size
        return GraphDataset(
            num_nodes=n,
            features=self.features[idx].copy(),
            labels=self.labels[idx].copy(),
            adjacency=sub,
            num_classes=self.num_classes,
            train_mask=np.ones(n, dtype=bool),
            val_mask=np.zeros(n, dtype=bool),
            test_mask=np.zeros(n, dtype=bool),
            mode="transductive",
        )

    def fingerprint(self):
        """Content hash used to tie trajectory buffers to their dataset."""
        coo = self.adjacency.tocoo()
        order = np.lexsort((coo.col, coo.row))
        h = hashlib.sha256()
        h.update(
            json.dumps(
                {"num_nodes": self.num_nodes, "num_classes": self.num_classes, "mode": self.mode},
                sort_keys=True,
            ).encode()
        )
        h.update(np.ascontiguousarray(self.features, dtype="<f8").tobytes())
        h.update(self.labels.astype("<i8").tobytes())
        h.update(coo.row[order].astype("<i8").tobytes())
        h.update(coo.col[order].astype("<i8").tobytes())
        for mask in (self.train_mask, self.val_mask, self.test_mask):
            h.update(np.packbits(mask).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class NormalizedAdjacency:
    """D^{-1/2} (A + I) D^{-1/2}, dense or CSR depending on the input.

    `order` records how many propagation hops are already baked in (0 for
    the plain normalized operator).
    """

    matrix: object
    order: int = 0

    @property
    def is_sparse(self):
        return sp.issparse(self.matrix)


@dataclass(frozen=True)
class PropagatedFeatures:
    """Features after k rounds of normalized-adjacency smoothing."""

    matrix: np.ndarray
    k: int


def normalize_adjacency(adjacency, add_self_loops=True):
    """Symmetrically normalize a nonnegative symmetric adjacency matrix.

    Parameters
    ----------
    adjacency : (n, n) ndarray or scipy sparse matrix
        Symmetric, entrywise nonnegative. Works for the binary original
        adjacency and for dense weighted synthetic adjacencies alike.
    add_self_loops : bool
        When True (default) normalize A + I, so zero-degree rows stay
        well-defined. When False, every row of A must have positive sum.
    """
    a = adjacency
    if sp.issparse(a):
        a = a.tocsr().astype(np.float64)
        if (a != a.T).nnz:
            raise ValidationError("adjacency is not symmetric")
        if a.nnz and a.data.min() < 0:
            raise ValidationError("adjacency has negative entries")
        t = (a + sp.eye(a.shape[0], format="csr")) if add_self_loops else a
        deg = np.asarray(t.sum(axis=1)).ravel()
        _check_degrees(deg, add_self_loops)
        dinv = 1.0 / np.sqrt(deg)
        out = sp.diags(dinv) @ t @ sp.diags(dinv)
        return NormalizedAdjacency(out.tocsr())
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"adjacency must be square, got {a.shape}")
    if not np.isfinite(a).all():
        raise ValidationError("adjacency has non-finite entries")
    if np.abs(a - a.T).max(initial=0.0) > 1e-9:
        raise ValidationError("adjacency is not symmetric")
    if a.size and a.min() < 0:
        raise ValidationError("adjacency has negative entries")
    t = a + np.eye(a.shape[0]) if add_self_loops else a
    deg = t.sum(axis=1)
    _check_degrees(deg, add_self_loops)
    dinv = 1.0 / np.sqrt(deg)
    return NormalizedAdjacency(dinv[:, None] * t * dinv[None, :])


def _check_degrees(deg, add_self_loops):
    bad = np.flatnonzero(deg <= 0)
    if bad.size:
        if add_self_loops:
            raise ValidationError(f"negative degree at row {int(bad[0])}")
        raise DegenerateDegreeError(
            f"row {int(bad[0])} has zero degree; normalize with self-loops instead"
        )


def propagate(norm_adj, features, k):
    """Apply k rounds of smoothing, returning (norm_adj.matrix)^k @ features.

    The operator power is never materialized; k sparse-dense (or
    dense-dense) products are taken instead. k = 0 returns the features
    unchanged.
    """
    if k < 0:
        raise ValidationError("k must be nonnegative")
    x = np.asarray(features, dtype=np.float64)
    if norm_adj.matrix.shape[1] != x.shape[0]:
        raise ShapeError(
            f"cannot propagate {x.shape} features through {norm_adj.matrix.shape} operator"
        )
    out = x.copy()
    for _ in range(k):
        out = norm_adj.matrix @ out
    return PropagatedFeatures(np.asarray(out), norm_adj.order + k)


def class_distribution(labels, num_classes):
    """Per-class empirical frequencies of a label vector (sums to 1)."""
    y = np.asarray(labels)
    if y.size == 0:
        raise EmptyInputError("empty label vector")
    if y.min() < 0 or y.max() >= num_classes:
        raise ValidationError(f"labels outside [0, {num_classes})")
    counts = np.bincount(y, minlength=num_classes)
    return counts / counts.sum()


# ---------------------------------------------------------------------------
# Directory format
# ---------------------------------------------------------------------------

_FILES = ("meta.json", "edges.tsv", "features.csv", "labels.txt", "masks.json")


def load_dataset(path):
    """Read a dataset directory, validating content along the way.

    The edge list is symmetrized (reverse edges added), deduplicated, and
    stripped of self-loops.
    """
    for name in _FILES:
        if not os.path.isfile(os.path.join(path, name)):
            raise FormatError(f"missing file {name} in {path}")

    try:
        with open(os.path.join(path, "meta.json")) as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"meta.json is not valid JSON: {exc}") from exc
    for key in ("num_nodes", "num_features", "num_classes", "mode"):
        if key not in meta:
            raise FormatError(f"meta.json is missing key {key!r}")
    n, d, c = int(meta["num_nodes"]), int(meta["num_features"]), int(meta["num_classes"])

    features = _read_features(os.path.join(path, "features.csv"), n, d)
    labels = _read_labels(os.path.join(path, "labels.txt"), n)
    rows, cols = _read_edges(os.path.join(path, "edges.tsv"), n)
    adjacency = _edges_to_csr(rows, cols, n)

    with open(os.path.join(path, "masks.json")) as fh:
        try:
            mask_idx = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"masks.json is not valid JSON: {exc}") from exc
    masks = {}
    for name in ("train", "val", "test"):
        if name not in mask_idx:
            raise FormatError(f"masks.json is missing key {name!r}")
        m = np.zeros(n, dtype=bool)
        idx = np.asarray(mask_idx[name], dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ValidationError(f"{name} mask references an invalid node index")
        m[idx] = True
        masks[name] = m

    return GraphDataset(
        num_nodes=n,
        features=features,
        labels=labels,
        adjacency=adjacency,
        num_classes=c,
        train_mask=masks["train"],
        val_mask=masks["val"],
        test_mask=masks["test"],
        mode=str(meta["mode"]),
    )


def save_dataset(dataset, path):
    """Write a dataset directory; round-trips arrays bit-exactly."""
    os.makedirs(path, exist_ok=True)
    meta = {
        "num_nodes": dataset.num_nodes,
        "num_features": dataset.num_features,
        "num_classes": dataset.num_classes,
        "mode": dataset.mode,
    }
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    # upper triangle only; loading re-symmetrizes
    coo = sp.triu(dataset.adjacency, k=1).tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(os.path.join(path, "edges.tsv"), "w") as fh:
        for u, v in zip(coo.row[order], coo.col[order]):
            fh.write(f"{u}\t{v}\n")
    # %.17g preserves every float64 exactly through the text round-trip
    np.savetxt(os.path.join(path, "features.csv"), dataset.features, fmt="%.17g", delimiter=",")
    with open(os.path.join(path, "labels.txt"), "w") as fh:
        for y in dataset.labels:
            fh.write(f"{int(y)}\n")
    masks = {
        name: np.flatnonzero(mask).tolist()
        for name, mask in (
            ("train", dataset.train_mask),
            ("val", dataset.val_mask),
            ("test", dataset.test_mask),
        )
    }
    with open(os.path.join(path, "masks.json"), "w") as fh:
        json.dump(masks, fh)
        fh.write("\n")


def _read_features(path, n, d):
    try:
        x = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"features.csv is malformed: {exc}") from exc
    if x.shape != (n, d):
        raise ValidationError(f"features.csv has shape {x.shape}, expected ({n}, {d})")
    return x


def _read_labels(path, n):
    try:
        y = np.loadtxt(path, dtype=np.int64, ndmin=1)
    except ValueError as exc:
        raise FormatError(f"labels.txt is malformed: {exc}") from exc
    if y.shape != (n,):
        raise ValidationError(f"labels.txt has {y.shape[0]} lines, expected {n}")
    return y


def _read_edges(path, n):
    rows, cols = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"edges.tsv line {lineno}: expected 'u<TAB>v'")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise FormatError(f"edges.tsv line {lineno}: non-integer endpoint") from exc
            if not (0 <= u < n and 0 <= v < n):
                raise ValidationError(f"edges.tsv line {lineno}: edge ({u}, {v}) out of range")
            rows.append(u)
            cols.append(v)
    return np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)


def _edges_to_csr(rows, cols, n):
    """Symmetrize, deduplicate, and drop self-loops."""
    keep = rows != cols
    rows, cols = rows[keep], cols[keep]
    r = np.concatenate([rows, cols])
    c = np.concatenate([cols, rows])
    a = sp.csr_matrix((np.ones(r.size), (r, c)), shape=(n, n))
    a.data[:] = 1.0  # collapse duplicates
    return a
