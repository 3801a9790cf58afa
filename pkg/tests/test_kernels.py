import numpy as np
import pytest

from graphon_games.kernels import (
    LabelGrid,
    apply_to_function,
    apply_to_measure,
    bilinear_kernel,
    constant_kernel,
    cut_norm_step,
    degree,
    grid_matrix,
    is_constant_degree,
    l1_norm,
    l2_norm,
    min_kernel,
    opnorm_inf_to_1,
    psd_check,
    step_kernel,
    two_block_kernel,
)
from graphon_games.measures import LabelStateMeasure


class TestStepKernel:
    def test_block_lookup(self):
        k = step_kernel([[0.0, 2.0], [2.0, 0.0]])
        assert k(0.1, 0.7) == 2.0
        assert k(0.1, 0.3) == 0.0

    def test_zero_matrix(self):
        k = step_kernel(np.zeros((3, 3)))
        u = np.linspace(0, 1, 17)
        assert np.all(k(u[:, None], u[None, :]) == 0.0)

    def test_constant_blocks_match_constant_kernel(self):
        p = 0.37
        k = step_kernel(np.full((2, 2), p))
        c = constant_kernel(p)
        u = np.linspace(0, 1, 50)
        np.testing.assert_array_equal(
            k(u[:, None], u[None, :]), c(u[:, None], u[None, :])
        )

    def test_negative_entries_rejected(self):
        with pytest.raises(ValueError):
            step_kernel([[0.0, -1.0], [1.0, 0.0]])

    def test_last_interval_closed(self):
        k = step_kernel([[1.0, 2.0], [3.0, 4.0]])
        assert k(1.0, 1.0) == 4.0

    def test_quadrature_agrees_with_block_sums(self):
        rng = np.random.default_rng(0)
        xi = rng.uniform(0, 2, (4, 4))
        k = step_kernel(xi)
        # tabulated copy evaluated by quadrature-style grid averaging
        nodes = (np.arange(1024) + 0.5) / 1024
        vals = k(nodes[:, None], nodes[None, :])
        assert abs(vals.mean() - l1_norm(k)) <= 1e-12
        u = 0.3
        assert abs(k(np.full(1024, u), nodes).mean() - degree(k, u)) <= 1e-12


class TestDegree:
    def test_constant_kernel_unit_degree(self):
        k = constant_kernel(1.0)
        u = np.linspace(0, 1, 9)
        np.testing.assert_allclose(degree(k, u), 1.0)
        assert is_constant_degree(k, 1e-12)

    def test_laplacian_step_kernel_constant_degree(self):
        # any connected graph: row sums of (1/n) xi equal 1
        adj = np.array(
            [[0, 1, 1, 0], [1, 0, 1, 0], [1, 1, 0, 1], [0, 0, 1, 0]], dtype=float
        )
        deg = adj.sum(axis=1)
        xi = (4.0 / deg)[:, None] * adj
        k = step_kernel(xi)
        np.testing.assert_allclose(degree(k, (np.arange(4) + 0.5) / 4), 1.0, atol=1e-12)
        assert is_constant_degree(k, 1e-9)

    def test_min_kernel_closed_form(self):
        k = min_kernel()
        u = np.array([0.0, 0.25, 0.5, 1.0])
        expected = u - u**2 / 2
        np.testing.assert_allclose(degree(k, u), expected, atol=1e-5)
        assert degree(k, 1.0) == pytest.approx(0.5, abs=1e-6)

    def test_two_block_degrees(self):
        k = two_block_kernel(1.6, 0.4, 0.2, 1.0)
        np.testing.assert_allclose(degree(k, np.array([0.2, 0.8])), [1.0, 0.6])
        assert not is_constant_degree(k, 1e-9)
        k2 = two_block_kernel(1.5, 0.5, 0.5, 1.5)
        assert is_constant_degree(k2, 1e-12)


class TestNorms:
    def test_constant(self):
        k = constant_kernel(0.8)
        assert l1_norm(k) == pytest.approx(0.8)
        assert l2_norm(k) == pytest.approx(0.8)

    def test_step_l1_block_average(self):
        k = step_kernel([[0.0, 1.0], [1.0, 0.0]])
        assert l1_norm(k) == pytest.approx(0.5)

    def test_two_block_l2(self):
        k = two_block_kernel(1.6, 0.4, 0.2, 1.0)
        assert l2_norm(k) == pytest.approx(np.sqrt(0.94), abs=1e-12)


class TestCutNorm:
    def test_zero_matrix(self):
        assert cut_norm_step(np.zeros((3, 3))).value == 0.0

    def test_exchange_matrix(self):
        res = cut_norm_step(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert res.value == pytest.approx(0.5)
        assert set(res.certificate[0]) == {0, 1}
        assert set(res.certificate[1]) == {0, 1}

    def test_one_by_one_constant(self):
        res = cut_norm_step(np.array([[0.7]]))
        assert res.value == pytest.approx(0.7)

    def test_exhaustive_oracle_small(self):
        # brute force over all pairs of index sets
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(2, 6))
            xi = rng.uniform(-1, 1, (n, n))
            best = 0.0
            for smask in range(1 << n):
                s = np.array([(smask >> i) & 1 for i in range(n)], dtype=float)
                for tmask in range(1 << n):
                    t = np.array([(tmask >> i) & 1 for i in range(n)], dtype=float)
                    best = max(best, abs(s @ xi @ t) / n**2)
            assert cut_norm_step(xi).value == pytest.approx(best, abs=1e-12)

    def test_size_cap(self):
        with pytest.raises(ValueError):
            cut_norm_step(np.zeros((21, 21)))

    def test_heuristic_requires_seed(self):
        with pytest.raises(ValueError):
            cut_norm_step(np.zeros((2, 2)), mode="heuristic")

    def test_heuristic_lower_bound_and_match_rate(self):
        rng = np.random.default_rng(9)
        hits = 0
        trials = 40
        for trial in range(trials):
            n = int(rng.integers(3, 13))
            xi = rng.uniform(0, 1, (n, n))
            np.fill_diagonal(xi, 0.0)
            exact = cut_norm_step(xi).value
            heur = cut_norm_step(xi, mode="heuristic", restarts=64, seed=trial).value
            assert heur <= exact + 1e-10
            hits += heur >= exact - 1e-9
        assert hits >= 0.95 * trials

    def test_l1_dominance(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            n = int(rng.integers(2, 10))
            xi = rng.uniform(0, 2, (n, n))
            assert cut_norm_step(xi).value <= l1_norm(step_kernel(xi)) + 1e-12


class TestOpNorm:
    def test_zero(self):
        assert opnorm_inf_to_1(np.zeros((4, 4))).value == 0.0

    def test_exchange_matrix_formula(self):
        # max over sign vectors of s' xi t / n^2; all four patterns give |.| = 2/4
        res = opnorm_inf_to_1(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert res.value == pytest.approx(0.5)

    def test_exhaustive_oracle_small(self):
        rng = np.random.default_rng(13)
        for _ in range(15):
            n = int(rng.integers(2, 6))
            xi = rng.uniform(-1, 1, (n, n))
            best = -np.inf
            for smask in range(1 << n):
                s = np.array([1.0 if (smask >> i) & 1 else -1.0 for i in range(n)])
                for tmask in range(1 << n):
                    t = np.array([1.0 if (tmask >> i) & 1 else -1.0 for i in range(n)])
                    best = max(best, (s @ xi @ t) / n**2)
            assert opnorm_inf_to_1(xi).value == pytest.approx(best, abs=1e-12)

    def test_sandwich_inequality_random(self):
        rng = np.random.default_rng(2)
        for _ in range(40):
            n = int(rng.integers(2, 9))
            xi = rng.uniform(0, 1, (n, n))
            cut = cut_norm_step(xi).value
            op = opnorm_inf_to_1(xi).value
            assert cut - 1e-12 <= op <= 4 * cut + 1e-12

    def test_heuristic_lower_bound(self):
        rng = np.random.default_rng(31)
        for trial in range(20):
            n = int(rng.integers(3, 11))
            xi = rng.uniform(0, 1, (n, n))
            exact = opnorm_inf_to_1(xi).value
            heur = opnorm_inf_to_1(xi, mode="heuristic", restarts=64, seed=trial).value
            assert heur <= exact + 1e-10


class TestOperators:
    def test_apply_constant_kernel_preserves_constants(self):
        grid = LabelGrid(16)
        k = constant_kernel(1.0)
        phi = np.full(16, 3.25)
        np.testing.assert_allclose(apply_to_function(k, phi, grid), 3.25)

    def test_apply_zero_kernel(self):
        grid = LabelGrid(8)
        k = step_kernel(np.zeros((2, 2)))
        np.testing.assert_array_equal(apply_to_function(k, np.ones(8), grid), 0.0)

    def test_two_block_indicator(self):
        a, b = 1.4, 0.6
        k = two_block_kernel(a, b, b, a)
        grid = LabelGrid(8)
        phi = (grid.midpoints < 0.5).astype(float)
        out = apply_to_function(k, phi, grid)
        np.testing.assert_allclose(out[:4], a / 2)
        np.testing.assert_allclose(out[4:], b / 2)

    def test_apply_to_measure_constant_is_second_marginal(self):
        k = constant_kernel(1.0)
        m = LabelStateMeasure([0.1, 0.6, 0.9], [1.0, 2.0, 5.0], [0.2, 0.3, 0.5])
        for u in (0.0, 0.42, 1.0):
            res = apply_to_measure(k, m, u)
            np.testing.assert_array_equal(res.x, m.second_marginal().x)
            np.testing.assert_allclose(res.w, m.second_marginal().w)

    def test_apply_to_measure_recovers_neighborhood_measure(self):
        rng = np.random.default_rng(4)
        n = 6
        xi = rng.uniform(0, 2, (n, n))
        np.fill_diagonal(xi, 0.0)
        k = step_kernel(xi)
        labels = (np.arange(n) + 0.5) / n
        states = rng.normal(size=n)
        m = LabelStateMeasure.empirical(labels, states)
        for i in range(n):
            res = apply_to_measure(k, m, labels[i])
            from graphon_games.measures import neighborhood_measure

            ref = neighborhood_measure(xi, states, i)
            np.testing.assert_array_equal(res.x, ref.x)
            np.testing.assert_allclose(res.w, ref.w, atol=1e-15)

    def test_apply_to_measure_zero_kernel(self):
        k = step_kernel(np.zeros((2, 2)))
        m = LabelStateMeasure([0.3], [1.0], [1.0])
        assert apply_to_measure(k, m, 0.5).natoms == 0

    def test_operator_linearity_on_measures(self):
        k = two_block_kernel(1.0, 0.5, 0.5, 2.0)
        rng = np.random.default_rng(8)
        m1 = LabelStateMeasure(rng.uniform(0, 1, 5), rng.normal(size=5), rng.uniform(0, 1, 5))
        m2 = LabelStateMeasure(rng.uniform(0, 1, 4), rng.normal(size=4), rng.uniform(0, 1, 4))
        a, b = 0.7, 1.3
        comb = LabelStateMeasure(
            np.concatenate([m1.u, m2.u]),
            np.concatenate([m1.x, m2.x]),
            np.concatenate([a * m1.w, b * m2.w]),
        )
        u = 0.77
        lhs = apply_to_measure(k, comb, u)
        rhs = apply_to_measure(k, m1, u).scaled(a) + apply_to_measure(k, m2, u).scaled(b)
        np.testing.assert_array_equal(lhs.x, rhs.x)
        np.testing.assert_allclose(lhs.w, rhs.w, atol=1e-14)


class TestPSD:
    def test_constant_positive(self):
        flag, eig = psd_check(constant_kernel(0.9), LabelGrid(16))
        assert flag
        assert eig == pytest.approx(0.0, abs=1e-12)

    def test_antidiagonal_two_block(self):
        flag, eig = psd_check(two_block_kernel(0.0, 1.0, 1.0, 0.0), LabelGrid(2))
        assert not flag
        assert eig == pytest.approx(-0.5, abs=1e-12)

    def test_min_kernel_brownian_covariance(self):
        flag, eig = psd_check(min_kernel(), LabelGrid(64))
        assert flag


class TestBilinearKernel:
    def test_matches_corners_and_interpolates(self):
        k = bilinear_kernel([[1.6, 0.4], [0.2, 1.0]])
        assert k(0.0, 0.0) == pytest.approx(1.6)
        assert k(1.0, 1.0) == pytest.approx(1.0)
        assert k(0.5, 0.5) == pytest.approx((1.6 + 0.4 + 0.2 + 1.0) / 4)

    def test_grid_matrix_shape(self):
        grid = LabelGrid(4)
        m = grid_matrix(bilinear_kernel([[1.0, 0.0], [0.0, 1.0]]), grid)
        assert m.shape == (4, 4)
