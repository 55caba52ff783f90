import json
import os

import numpy as np
import pytest
import scipy.sparse as sp

from gcsr.data import (
    class_distribution,
    load_dataset,
    normalize_adjacency,
    propagate,
    save_dataset,
)
from gcsr.errors import (
    DegenerateDegreeError,
    EmptyInputError,
    FormatError,
    ShapeError,
    ValidationError,
)

from conftest import graph_from_edges


def write_dataset_dir(path, num_nodes, edges, labels, num_classes, masks, features=None,
                      mode="transductive"):
    os.makedirs(path, exist_ok=True)
    if features is None:
        features = [[float(i), float(i) + 0.5] for i in range(num_nodes)]
    features = np.asarray(features, dtype=np.float64)
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump(
            {
                "num_nodes": num_nodes,
                "num_features": features.shape[1],
                "num_classes": num_classes,
                "mode": mode,
            },
            fh,
        )
    with open(os.path.join(path, "edges.tsv"), "w") as fh:
        for u, v in edges:
            fh.write(f"{u}\t{v}\n")
    np.savetxt(os.path.join(path, "features.csv"), features, fmt="%.17g", delimiter=",")
    with open(os.path.join(path, "labels.txt"), "w") as fh:
        fh.write("\n".join(str(y) for y in labels) + "\n")
    with open(os.path.join(path, "masks.json"), "w") as fh:
        json.dump(masks, fh)


class TestLoadDataset:
    def test_path_graph(self, tmp_path):
        write_dataset_dir(
            tmp_path, 3, [(0, 1), (1, 2)], [0, 0, 1], 2,
            {"train": [0, 2], "val": [], "test": [1]},
        )
        ds = load_dataset(tmp_path)
        assert ds.num_nodes == 3 and ds.num_classes == 2
        expected = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        assert (ds.adjacency.toarray() == expected).all()

    def test_reverse_edge_symmetrized(self, tmp_path):
        write_dataset_dir(tmp_path, 2, [(1, 0)], [0, 1], 2, {"train": [0, 1], "val": [], "test": []})
        a = load_dataset(tmp_path).adjacency.toarray()
        assert a[0, 1] == 1.0 and a[1, 0] == 1.0

    def test_self_loop_dropped(self, tmp_path):
        write_dataset_dir(
            tmp_path, 2, [(0, 0), (0, 1)], [0, 1], 2, {"train": [0, 1], "val": [], "test": []}
        )
        a = load_dataset(tmp_path).adjacency.toarray()
        assert a[0, 0] == 0.0 and a[1, 1] == 0.0

    def test_duplicate_edges_collapse(self, tmp_path):
        write_dataset_dir(
            tmp_path, 2, [(0, 1), (0, 1), (1, 0)], [0, 1], 2,
            {"train": [0, 1], "val": [], "test": []},
        )
        a = load_dataset(tmp_path).adjacency.toarray()
        assert a[0, 1] == 1.0

    def test_missing_file_names_it(self, tmp_path):
        write_dataset_dir(tmp_path, 2, [(0, 1)], [0, 1], 2, {"train": [0, 1], "val": [], "test": []})
        os.remove(tmp_path / "labels.txt")
        with pytest.raises(FormatError, match="labels.txt"):
            load_dataset(tmp_path)

    def test_label_out_of_range_names_node(self, tmp_path):
        write_dataset_dir(tmp_path, 2, [(0, 1)], [0, 5], 2, {"train": [0, 1], "val": [], "test": []})
        with pytest.raises(ValidationError, match="node 1"):
            load_dataset(tmp_path)

    def test_overlapping_masks_rejected(self, tmp_path):
        write_dataset_dir(tmp_path, 2, [(0, 1)], [0, 1], 2, {"train": [0, 1], "val": [0], "test": []})
        with pytest.raises(ValidationError, match="disjoint"):
            load_dataset(tmp_path)

    def test_edge_out_of_range(self, tmp_path):
        write_dataset_dir(tmp_path, 2, [(0, 7)], [0, 1], 2, {"train": [0, 1], "val": [], "test": []})
        with pytest.raises(ValidationError, match="out of range"):
            load_dataset(tmp_path)

    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        ds = graph_from_edges(
            5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)], [0, 1, 0, 1, 0], 2,
            features=rng.standard_normal((5, 4)),
        )
        save_dataset(ds, tmp_path / "a")
        loaded = load_dataset(tmp_path / "a")
        save_dataset(loaded, tmp_path / "b")
        again = load_dataset(tmp_path / "b")
        assert (loaded.features == ds.features).all()
        assert (again.features == loaded.features).all()
        assert (again.labels == loaded.labels).all()
        assert (again.adjacency != loaded.adjacency).nnz == 0
        assert again.fingerprint() == ds.fingerprint()


class TestNormalize:
    def test_two_node_hand_case(self):
        out = normalize_adjacency(np.array([[0.0, 1.0], [1.0, 0.0]])).matrix
        assert np.allclose(out, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_zero_matrix_gives_identity(self):
        out = normalize_adjacency(np.zeros((2, 2))).matrix
        assert (out == np.eye(2)).all()

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(0)
        a = np.abs(rng.standard_normal((6, 6)))
        a = a + a.T
        np.fill_diagonal(a, 0.0)
        out = normalize_adjacency(a).matrix
        # independent elementwise recomputation
        t = a + np.eye(6)
        deg = t.sum(axis=1)
        oracle = np.empty_like(t)
        for i in range(6):
            for j in range(6):
                oracle[i, j] = t[i, j] / (np.sqrt(deg[i]) * np.sqrt(deg[j]))
        assert np.abs(out - oracle).max() <= 1e-12

    def test_sparse_input_gives_sparse_output(self):
        a = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
        na = normalize_adjacency(a)
        assert na.is_sparse
        assert np.allclose(na.matrix.toarray(), [[0.5, 0.5], [0.5, 0.5]])

    def test_zero_degree_without_self_loops(self):
        a = np.array([[0.0, 0.0], [0.0, 0.0]])
        with pytest.raises(DegenerateDegreeError, match="row 0"):
            normalize_adjacency(a, add_self_loops=False)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValidationError, match="symmetric"):
            normalize_adjacency(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_output_symmetric_nonnegative_bounded(self):
        # row sums of the symmetric normalization are NOT bounded by 1 in
        # general (a star center exceeds it); the sound elementwise bound for
        # binary input is max entry <= 1, plus the spectral bound below.
        rng = np.random.default_rng(5)
        for trial in range(10):
            n = int(rng.integers(2, 12))
            a = (rng.random((n, n)) < 0.4).astype(float)
            a = np.triu(a, 1)
            a = a + a.T
            m = normalize_adjacency(a).matrix
            assert np.abs(m - m.T).max() <= 1e-9
            assert m.min() >= 0
            assert m.max() <= 1 + 1e-9

    def test_eigenvalues_in_unit_interval(self):
        rng = np.random.default_rng(8)
        for trial in range(5):
            n = int(rng.integers(3, 50))
            a = (rng.random((n, n)) < 0.2).astype(float)
            a = np.triu(a, 1)
            a = a + a.T
            m = normalize_adjacency(a).matrix
            eig = np.linalg.eigvalsh(m)
            assert eig.min() >= -1 - 1e-6 and eig.max() <= 1 + 1e-6


class TestPropagate:
    def test_k_zero_identity(self):
        na = normalize_adjacency(np.array([[0.0, 1.0], [1.0, 0.0]]))
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = propagate(na, x, 0)
        assert (out.matrix == x).all() and out.k == 0

    def test_single_hop_hand_case(self):
        na = normalize_adjacency(np.array([[0.0, 1.0], [1.0, 0.0]]))
        out = propagate(na, np.eye(2), 1).matrix
        assert np.allclose(out, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_three_hops_match_dense_power_oracle(self):
        rng = np.random.default_rng(1)
        a = (rng.random((8, 8)) < 0.4).astype(float)
        a = np.triu(a, 1)
        a = a + a.T
        na_sparse = normalize_adjacency(sp.csr_matrix(a))
        x = rng.standard_normal((8, 3))
        out = propagate(na_sparse, x, 3).matrix
        dense = normalize_adjacency(a).matrix
        oracle = dense @ dense @ dense @ x
        assert np.abs(out - oracle).max() <= 1e-10

    def test_power_additivity(self):
        rng = np.random.default_rng(2)
        a = (rng.random((7, 7)) < 0.5).astype(float)
        a = np.triu(a, 1)
        a = a + a.T
        na = normalize_adjacency(a)
        x = rng.standard_normal((7, 2))
        both = propagate(na, x, 5).matrix
        stepped = propagate(na, propagate(na, x, 2).matrix, 3).matrix
        assert np.abs(both - stepped).max() <= 1e-9

    def test_shape_mismatch(self):
        na = normalize_adjacency(np.zeros((2, 2)))
        with pytest.raises(ShapeError):
            propagate(na, np.zeros((3, 2)), 1)


class TestClassDistribution:
    def test_half_half(self):
        assert (class_distribution([0, 0, 1, 1], 2) == [0.5, 0.5]).all()

    def test_missing_classes_zero(self):
        assert (class_distribution([2], 3) == [0.0, 0.0, 1.0]).all()

    def test_three_class_case(self):
        out = class_distribution([0, 0, 0, 1, 1, 2], 3)
        assert np.allclose(out, [0.5, 1 / 3, 1 / 6], atol=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            class_distribution([], 2)


class TestDatasetValidation:
    def test_train_mask_must_cover_classes(self):
        with pytest.raises(ValidationError, match="class 1"):
            graph_from_edges(3, [(0, 1)], [0, 0, 1], 2, train=[0, 1])

    def test_inductive_train_view(self):
        ds = graph_from_edges(
            4, [(0, 1), (1, 2), (2, 3)], [0, 1, 0, 1], 2,
            train=[0, 1], test=[2, 3], mode="inductive",
        )
        view = ds.train_view()
        assert view.num_nodes == 2
        assert (view.adjacency.toarray() == [[0, 1], [1, 0]]).all()
        assert view.train_mask.all()

    def test_transductive_view_is_self(self):
        ds = graph_from_edges(3, [(0, 1), (1, 2)], [0, 1, 0], 2)
        assert ds.train_view() is ds

    def test_fingerprint_changes_with_content(self):
        ds1 = graph_from_edges(3, [(0, 1), (1, 2)], [0, 1, 0], 2)
        ds2 = graph_from_edges(3, [(0, 1)], [0, 1, 0], 2)
        assert ds1.fingerprint() != ds2.fingerprint()
