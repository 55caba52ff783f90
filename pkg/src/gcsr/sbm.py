"""Stochastic block model benchmark graphs with Gaussian class features.

Used by the test suite, the demos, and the bundled toy dataset: small,
fully deterministic given a seed, and hard enough that structure actually
matters for classification.
"""

import numpy as np
import scipy.sparse as sp

from .data import GraphDataset
from .errors import ValidationError


def sbm_dataset(
    num_nodes=300,
    num_classes=3,
    intra_p=0.3,
    inter_p=0.02,
    feature_dim=16,
    center_scale=1.0,
    noise_scale=1.0,
    train_frac=0.3,
    val_frac=0.2,
    seed=0,
    mode="transductive",
):
    """Sample a block-model graph with noisy Gaussian blob features.

    Nodes are grouped into near-equal class blocks; edges appear with
    probability `intra_p` inside a block and `inter_p` across blocks.
    Features are class centers (standard normal, scaled by `center_scale`)
    plus isotropic noise. Masks are stratified per class.
    """
    if num_nodes < num_classes:
        raise ValidationError("need at least one node per class")
    if not (0 < train_frac and train_frac + val_frac < 1):
        raise ValidationError("train_frac and val_frac must leave room for a test split")
    rng = np.random.default_rng(seed)

    sizes = np.full(num_classes, num_nodes // num_classes, dtype=np.int64)
    sizes[: num_nodes % num_classes] += 1
    labels = np.repeat(np.arange(num_classes), sizes)

    probs = np.where(labels[:, None] == labels[None, :], intra_p, inter_p)
    upper = np.triu(rng.random((num_nodes, num_nodes)) < probs, k=1)
    adjacency = sp.csr_matrix(upper.astype(np.float64))
    adjacency = adjacency + adjacency.T

    centers = rng.standard_normal((num_classes, feature_dim)) * center_scale
    features = centers[labels] + rng.standard_normal((num_nodes, feature_dim)) * noise_scale

    train_mask = np.zeros(num_nodes, dtype=bool)
    val_mask = np.zeros(num_nodes, dtype=bool)
    test_mask = np.zeros(num_nodes, dtype=bool)
    for c in range(num_classes):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_train = max(1, int(round(train_frac * idx.size)))
        n_val = int(round(val_frac * idx.size))
        train_mask[idx[:n_train]] = True
        val_mask[idx[n_train : n_train + n_val]] = True
        test_mask[idx[n_train + n_val :]] = True

    return GraphDataset(
        num_nodes=num_nodes,
        features=features,
        labels=labels,
        adjacency=adjacency.tocsr(),
        num_classes=num_classes,
        train_mask=train_mask,
        val_mask=val_mask,
        test_mask=test_mask,
        mode=mode,
    )


def toy_dataset():
    """The 30-node, 3-class block-model graph bundled with the repository."""
    return sbm_dataset(
        num_nodes=30,
        num_classes=3,
        intra_p=0.4,
        inter_p=0.05,
        feature_dim=8,
        center_scale=1.5,
        noise_scale=1.0,
        train_frac=0.5,
        val_frac=0.2,
        seed=7,
    )
