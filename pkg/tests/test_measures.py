import numpy as np
import pytest

from graphon_games.measures import (
    LabelStateMeasure,
    MeasureFlow,
    ParticleMeasure,
    bl_distance,
    bl_distance_dense_oracle,
    bl_upper_bound,
    neighborhood_measure,
)


def random_measure(rng, max_atoms=30, spread=3.0):
    k = rng.integers(1, max_atoms + 1)
    return ParticleMeasure(rng.uniform(-spread, spread, k), rng.uniform(0.0, 1.0, k))


class TestParticleMeasure:
    def test_canonical_form_sorts_dedups_drops_zeros(self):
        m = ParticleMeasure([2.0, -1.0, 2.0, 0.5], [0.1, 0.2, 0.3, 0.0])
        assert m.x.tolist() == [-1.0, 2.0]
        assert m.w.tolist() == [0.2, 0.4]

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            ParticleMeasure([0.0], [-1.0])

    def test_mean_raw_moment(self):
        assert ParticleMeasure.dirac(3.0).mean() == 3.0
        assert ParticleMeasure.zero().mean() == 0.0
        assert ParticleMeasure([1.0, 3.0], [0.5, 0.5]).mean() == 2.0

    def test_zero_mass_measures_are_legal(self):
        z = ParticleMeasure.zero()
        assert z.mass() == 0.0 and z.natoms == 0


class TestNeighborhoodMeasure:
    def test_zero_matrix_gives_zero_measure(self):
        xi = np.zeros((3, 3))
        m = neighborhood_measure(xi, [1.0, 2.0, 3.0], 0)
        assert m.mass() == 0.0

    def test_two_player_arithmetic(self):
        # n=2, xi_01 = 2, states (5, 7): single atom at 7 with mass 1
        xi = np.array([[0.0, 2.0], [2.0, 0.0]])
        m = neighborhood_measure(xi, [5.0, 7.0], 0)
        assert m.x.tolist() == [7.0]
        assert m.w.tolist() == [1.0]

    def test_laplacian_rows_give_uniform_neighbor_measure(self):
        # path graph 0-1-2: player 1 has neighbors {0, 2} with degree 2
        adj = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)
        deg = adj.sum(axis=1)
        xi = (3.0 / deg)[:, None] * adj
        m = neighborhood_measure(xi, [10.0, 20.0, 30.0], 1)
        assert m.x.tolist() == [10.0, 30.0]
        np.testing.assert_allclose(m.w, [0.5, 0.5])


class TestBLDistance:
    def test_identical_measures(self):
        m = ParticleMeasure([0.0, 1.0], [0.3, 0.7])
        assert bl_distance(m, m) == 0.0

    def test_dirac_pair_formula(self):
        # ||delta_x - delta_y||_BL = min(2, |x - y|)
        for gap in (0.3, 1.0, 1.9, 2.0, 5.0):
            d = bl_distance(ParticleMeasure.dirac(0.0), ParticleMeasure.dirac(gap))
            assert d == pytest.approx(min(2.0, gap), abs=1e-12)

    def test_mass_bound(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            m1, m2 = random_measure(rng), random_measure(rng)
            assert bl_distance(m1, m2) <= m1.mass() + m2.mass() + 1e-12

    def test_distance_to_zero_of_tight_measure_is_mass(self):
        # phi = 1 is admissible, so a nonnegative measure is at BL distance
        # exactly its mass from the zero measure when its support is a point
        m = ParticleMeasure([0.3], [0.8])
        assert bl_distance(m, ParticleMeasure.zero()) == pytest.approx(0.8, abs=1e-12)

    def test_matches_dense_lp_oracle(self):
        # acceptance-grade check at reduced count: full 500 pairs in acceptance
        rng = np.random.default_rng(42)
        for _ in range(100):
            m1, m2 = random_measure(rng), random_measure(rng)
            d_fast = bl_distance(m1, m2)
            d_oracle = bl_distance_dense_oracle(m1, m2)
            assert abs(d_fast - d_oracle) <= 1e-9

    def test_metric_axioms_on_random_triples(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            a, b, c = (random_measure(rng, 12) for _ in range(3))
            dab = bl_distance(a, b)
            dba = bl_distance(b, a)
            assert abs(dab - dba) <= 1e-10
            assert dab >= -1e-12
            assert bl_distance(a, a) <= 1e-12
            assert dab <= bl_distance(a, c) + bl_distance(c, b) + 1e-9

    def test_upper_bound_dominates(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            m1, m2 = random_measure(rng), random_measure(rng)
            assert bl_upper_bound(m1, m2) >= bl_distance(m1, m2) - 1e-10


class TestLabelStateMeasure:
    def test_empirical_and_second_marginal(self):
        m = LabelStateMeasure.empirical([0.1, 0.5, 0.9], [1.0, 2.0, 3.0])
        sm = m.second_marginal()
        np.testing.assert_allclose(sm.w, [1 / 3, 1 / 3, 1 / 3])
        assert m.normalized

    def test_conditional_mean_two_bins(self):
        m = LabelStateMeasure([0.2, 0.8], [1.0, 3.0], [0.5, 0.5])
        means = m.conditional_mean_by_bin([0.0, 0.5, 1.0])
        np.testing.assert_allclose(means, [1.0, 3.0])

    def test_product_measure_bins_all_equal(self):
        u = (np.arange(8) + 0.5) / 8
        m = LabelStateMeasure(u, np.full(8, 4.0), np.full(8, 1 / 8))
        means = m.conditional_mean_by_bin(np.linspace(0, 1, 5))
        np.testing.assert_allclose(means, 4.0)

    def test_empty_bin_reported_missing(self):
        m = LabelStateMeasure([0.1], [2.0], [1.0])
        means = m.conditional_mean_by_bin([0.0, 0.5, 1.0])
        assert means[0] == 2.0 and np.isnan(means[1])

    def test_label_range_validated(self):
        with pytest.raises(ValueError):
            LabelStateMeasure([1.5], [0.0], [1.0])


class TestMeasureFlow:
    def test_nearest_node_policy_sets_warning(self):
        ms = [LabelStateMeasure([0.5], [float(k)], [1.0]) for k in range(3)]
        flow = MeasureFlow(np.array([0.0, 0.5, 1.0]), ms)
        assert flow.marginal_at(0.5).x.tolist() == [1.0]
        assert not flow.nearest_node_warning
        assert flow.marginal_at(0.3).x.tolist() == [1.0]
        assert flow.nearest_node_warning

    def test_time_grid_must_increase(self):
        ms = [LabelStateMeasure([0.5], [0.0], [1.0])] * 2
        with pytest.raises(ValueError):
            MeasureFlow(np.array([0.0, 0.0]), ms)
