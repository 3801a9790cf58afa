import numpy as np
import pytest

from graphon_games.kernels import constant_kernel, step_kernel, two_block_kernel
from graphon_games.networks import (
    InteractionMatrix,
    LabelAssignment,
    condition_A,
    cut_distance_to,
    erdos_renyi,
    l1_distance_to,
    laplacian_matrix,
    load_edge_list,
    load_labels_csv,
    load_matrix_text,
    sample_from_graphon,
    save_edge_list,
    save_labels_csv,
    save_matrix_text,
    strong_operator_distance,
    probe_function_dictionary,
)


class TestInteractionMatrix:
    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(ValueError):
            InteractionMatrix([[1.0, 0.0], [0.0, 0.0]])

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            InteractionMatrix([[0.0, -1.0], [1.0, 0.0]])


class TestErdosRenyi:
    def test_complete_graph_at_p_one(self):
        xi = erdos_renyi(4, 1.0, seed=0)
        expected = np.ones((4, 4)) - np.eye(4)
        np.testing.assert_array_equal(xi.entries, expected)

    def test_normalized_entries(self):
        xi = erdos_renyi(30, 0.5, normalize=True, seed=1)
        vals = np.unique(xi.entries)
        assert set(vals.tolist()) <= {0.0, 2.0}

    def test_symmetry_and_zero_diag(self):
        xi = erdos_renyi(25, 0.3, seed=2)
        np.testing.assert_array_equal(xi.entries, xi.entries.T)
        assert np.all(np.diagonal(xi.entries) == 0)

    def test_seed_determinism(self):
        a = erdos_renyi(20, 0.4, seed=5)
        b = erdos_renyi(20, 0.4, seed=5)
        np.testing.assert_array_equal(a.entries, b.entries)

    def test_invalid_p(self):
        with pytest.raises(ValueError):
            erdos_renyi(5, 0.0, seed=1)
        with pytest.raises(ValueError):
            erdos_renyi(5, 1.5, seed=1)

    def test_requires_seed(self):
        with pytest.raises(ValueError):
            erdos_renyi(5, 0.5)


class TestSampling:
    def test_constant_one_simple_gives_complete_graph(self):
        xi, labels = sample_from_graphon(constant_kernel(1.0), 6, seed=3)
        np.testing.assert_array_equal(xi.entries, np.ones((6, 6)) - np.eye(6))

    def test_marginal_edge_frequency(self):
        p = 0.35
        xi, _ = sample_from_graphon(constant_kernel(p), 200, seed=4)
        n = 200
        off = xi.entries[~np.eye(n, dtype=bool)]
        freq = off.mean()
        stderr = np.sqrt(p * (1 - p) / off.size)
        assert abs(freq - p) <= 3 * stderr

    def test_weighted_entries_reproducible_and_exact(self):
        k = two_block_kernel(1.6, 0.4, 0.2, 1.0)
        xi1, lab1 = sample_from_graphon(k, 6, weighted=True, seed=7)
        xi2, lab2 = sample_from_graphon(k, 6, weighted=True, seed=7)
        np.testing.assert_array_equal(xi1.entries, xi2.entries)
        np.testing.assert_array_equal(lab1.labels, lab2.labels)
        u = lab1.labels
        expected = k(u[:, None], u[None, :])
        np.fill_diagonal(expected, 0.0)
        np.testing.assert_array_equal(xi1.entries, expected)
        assert np.all(np.diff(u) >= 0)

    def test_simple_mode_rejects_unbounded(self):
        with pytest.raises(ValueError):
            sample_from_graphon(constant_kernel(1.5), 5, seed=1)

    def test_symmetry_simple(self):
        xi, _ = sample_from_graphon(constant_kernel(0.5), 40, seed=9)
        np.testing.assert_array_equal(xi.entries, xi.entries.T)


class TestLaplacian:
    def test_complete_k3(self):
        adj = np.ones((3, 3)) - np.eye(3)
        xi = laplacian_matrix(adj)
        expected = 1.5 * adj
        np.testing.assert_array_equal(xi.entries, expected)

    def test_cycle_c4(self):
        adj = np.array(
            [[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]], dtype=float
        )
        xi = laplacian_matrix(adj)
        np.testing.assert_array_equal(xi.entries, 2.0 * adj)

    def test_row_stochasticity_exact(self):
        rng = np.random.default_rng(12)
        n = 7
        adj = (rng.random((n, n)) < 0.6).astype(float)
        adj = np.triu(adj, 1)
        adj = adj + adj.T
        adj[adj.sum(axis=1) == 0, 0] = 1.0  # avoid isolated rows
        adj[0, adj.sum(axis=1) == 0] = 1.0
        adj = np.clip(adj + adj.T, 0, 1)
        np.fill_diagonal(adj, 0.0)
        if (adj.sum(axis=1) == 0).any():
            pytest.skip("degenerate draw")
        xi = laplacian_matrix(adj)
        np.testing.assert_allclose(xi.entries.sum(axis=1) / n, 1.0, atol=1e-14)

    def test_constant_degree_kernel(self):
        adj = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]], dtype=float)
        xi = laplacian_matrix(adj)
        from graphon_games.kernels import degree

        k = step_kernel(xi.entries)
        np.testing.assert_allclose(degree(k, (np.arange(3) + 0.5) / 3), 1.0, atol=1e-14)

    def test_isolated_vertex_reported_with_index(self):
        adj = np.zeros((3, 3))
        adj[0, 1] = adj[1, 0] = 1.0
        with pytest.raises(ValueError, match="index 2"):
            laplacian_matrix(adj)


class TestConditionA:
    def test_zero_matrix(self):
        assert condition_A(np.zeros((5, 5))) == 0.0

    def test_bounded_entries(self):
        rng = np.random.default_rng(3)
        n = 24
        xi = rng.uniform(0, 1, (n, n))
        np.fill_diagonal(xi, 0.0)
        assert condition_A(xi) <= 1.0 / n

    def test_er_normalized_value(self):
        n, p = 100, 0.5
        xi = erdos_renyi(n, p, normalize=True, seed=17)
        value = condition_A(xi)
        # mean of squared entries is 1/p over off-diagonal cells
        mean_sq = 1.0 / p
        expected = (n * n - n) / n**3 * mean_sq
        var_sq = (1.0 / p**3) * (1 - p)  # Var[(Bern(p)/p)^2] = (1-p)/p^3
        stderr = np.sqrt(var_sq * (n * n - n)) / n**3
        assert abs(value - expected) <= 3 * stderr


class TestCutDistance:
    def test_self_distance_zero(self):
        xi = erdos_renyi(16, 0.5, seed=21)
        k = step_kernel(xi.entries)
        res = cut_distance_to(xi, k, seed=2)
        assert res.value == 0.0

    def test_er_unnormalized_trend(self):
        target = constant_kernel(0.5)
        vals = []
        for n in (64, 128, 256):
            xi = erdos_renyi(n, 0.5, seed=100 + n)
            vals.append(cut_distance_to(xi, target, restarts=32, seed=n).value)
        assert vals[0] > vals[1] > vals[2]

    def test_weighted_sample_l1_trend(self):
        # L1 convergence holds in probability; average a few draws per size
        k = two_block_kernel(0.9, 0.3, 0.3, 0.7)
        vals = []
        for n in (32, 128, 512):
            dists = [
                l1_distance_to(
                    sample_from_graphon(k, n, weighted=True, seed=300 + n + s)[0],
                    k,
                    resolution=2,
                )
                for s in range(6)
            ]
            vals.append(np.mean(dists))
        assert vals[0] > vals[1] > vals[2]

    def test_refinement_cap(self):
        from graphon_games.kernels import min_kernel

        xi = erdos_renyi(17, 0.5, seed=1)
        with pytest.raises(ValueError):
            cut_distance_to(xi, min_kernel(), resolution=1024, seed=1)


class TestStrongOperatorDiagnostic:
    def test_dictionary_has_16_functions(self):
        funcs = probe_function_dictionary(64)
        assert len(funcs) == 16

    def test_gaps_shrink_for_er(self):
        target = constant_kernel(0.5)
        tables = []
        for n in (32, 256):
            xi = erdos_renyi(n, 0.5, seed=50 + n)
            tables.append(strong_operator_distance(xi, target, resolution=1))
        worst_small = max(tables[0].values())
        worst_large = max(tables[1].values())
        assert worst_large < worst_small


class TestTextFormats:
    def test_matrix_roundtrip(self, tmp_path):
        xi = erdos_renyi(9, 0.5, normalize=True, seed=33)
        path = tmp_path / "xi.txt"
        save_matrix_text(path, xi)
        back = load_matrix_text(path)
        np.testing.assert_array_equal(back.entries, xi.entries)

    def test_edge_list_roundtrip(self, tmp_path):
        xi = erdos_renyi(8, 0.4, seed=34)
        path = tmp_path / "xi.edges"
        save_edge_list(path, xi)
        back = load_edge_list(path)
        np.testing.assert_array_equal(back.entries, xi.entries)

    def test_labels_roundtrip(self, tmp_path):
        labels = LabelAssignment.random_per_cell(12, seed=5)
        path = tmp_path / "labels.csv"
        save_labels_csv(path, labels)
        back = load_labels_csv(path, scheme="random_per_cell")
        np.testing.assert_array_equal(back.labels, labels.labels)


class TestLabelAssignment:
    def test_midpoint_in_cells(self):
        lab = LabelAssignment.midpoint(10)
        cells = np.floor(lab.labels * 10).astype(int)
        np.testing.assert_array_equal(cells, np.arange(10))

    def test_random_per_cell_in_cells(self):
        lab = LabelAssignment.random_per_cell(50, seed=2)
        lo = np.arange(50) / 50
        hi = (np.arange(50) + 1) / 50
        assert np.all(lab.labels >= lo) and np.all(lab.labels <= hi)

    def test_violating_labels_rejected(self):
        with pytest.raises(ValueError):
            LabelAssignment([0.9, 0.1], "midpoint")
