import numpy as np
import pytest

from graphon_games.arena import (
    ExplicitRule,
    StrategyProfile,
    TrackingProfile,
    field_control,
    lq_profile,
    objective,
    replay_player,
    simulate,
)
from graphon_games.initial import deterministic_map, independent_law
from graphon_games.kernels import constant_kernel
from graphon_games.lq import LQParams, solve_lq
from graphon_games.mfg import ModelSpec
from graphon_games.networks import InteractionMatrix, LabelAssignment, erdos_renyi


def zero_profile(n):
    return StrategyProfile([ExplicitRule(lambda t, x: 0.0 * x) for _ in range(n)])


def lone_player_setup(sigma=0.4):
    xi = InteractionMatrix(np.zeros((1, 1)))
    labels = LabelAssignment.midpoint(1)
    params = LQParams(
        c=1.0, T=1.0, sigma=sigma, kernel=constant_kernel(0.0),
        initial=independent_law("point", 0.0),
    )
    return xi, labels, params


class TestSimulate:
    def test_pure_diffusion_moments(self):
        xi, labels, params = lone_player_setup(sigma=0.4)
        res = simulate(xi, labels, zero_profile(1), params, paths=20000, dt=0.01, seed=1)
        x_T = res.terminal_states[:, 0]
        assert abs(x_T.mean()) <= 3 * x_T.std() / np.sqrt(x_T.size)
        var = x_T.var()
        se_var = np.sqrt(2.0 / (x_T.size - 1)) * params.sigma**2
        assert abs(var - params.sigma**2 * params.T) <= 3 * se_var

    def test_lq_profile_flocks_to_initial_mean(self):
        n = 200
        params = LQParams(
            c=1.0, T=1.0, sigma=0.3, kernel=constant_kernel(1.0),
            initial=deterministic_map(lambda u: u),
        )
        sol = solve_lq(params, 64)  # M = 0.5
        xi = erdos_renyi(n, 1.0, seed=2)  # complete graph as stand-in for W = 1
        labels = LabelAssignment.midpoint(n)
        res = simulate(xi, labels, lq_profile(sol, labels), params, paths=400, dt=0.01, seed=3)
        pop_mean = res.terminal_states.mean()
        # E[X_T] = psi(u)/(cT+1) + M cT/(cT+1) averages to 0.5
        se = res.terminal_states.mean(axis=1).std() / np.sqrt(400)
        assert abs(pop_mean - 0.5) <= 3 * se + 1e-3

    def test_seed_determinism_bitwise(self):
        xi = erdos_renyi(5, 0.7, seed=4)
        labels = LabelAssignment.midpoint(5)
        params = LQParams(
            c=1.0, T=0.5, sigma=0.2, kernel=constant_kernel(1.0),
            initial=independent_law("uniform", 0.0, 1.0),
        )
        a = simulate(xi, labels, zero_profile(5), params, paths=64, dt=0.05, seed=9,
                     store_paths=True)
        b = simulate(xi, labels, zero_profile(5), params, paths=64, dt=0.05, seed=9,
                     store_paths=True)
        np.testing.assert_array_equal(a.paths_array, b.paths_array)
        np.testing.assert_array_equal(a.objectives, b.objectives)

    def test_coplayers_untouched_by_deviation(self):
        # same seed, deviation in coordinate 2 only: all other columns bitwise equal
        xi = erdos_renyi(6, 0.5, seed=11)
        labels = LabelAssignment.midpoint(6)
        params = LQParams(
            c=1.0, T=0.5, sigma=0.25, kernel=constant_kernel(1.0),
            initial=independent_law("uniform", 0.0, 1.0),
        )
        base = zero_profile(6)
        dev = base.with_deviation(2, ExplicitRule(lambda t, x: 1.0 + 0.0 * x))
        ra = simulate(xi, labels, base, params, paths=50, dt=0.05, seed=13, store_paths=True)
        rb = simulate(xi, labels, dev, params, paths=50, dt=0.05, seed=13, store_paths=True)
        others = [i for i in range(6) if i != 2]
        np.testing.assert_array_equal(
            ra.paths_array[:, :, others], rb.paths_array[:, :, others]
        )
        assert not np.array_equal(ra.paths_array[:, :, 2], rb.paths_array[:, :, 2])

    def test_snapshot_neighborhood_measure(self):
        xi = erdos_renyi(4, 1.0, seed=5)
        labels = LabelAssignment.midpoint(4)
        params = LQParams(
            c=1.0, T=0.4, sigma=0.0, kernel=constant_kernel(1.0),
            initial=deterministic_map(lambda u: u),
        )
        res = simulate(xi, labels, zero_profile(4), params, paths=3, dt=0.1, seed=6,
                       snapshot_times=(0.0,))
        m = res.neighborhood_measure(xi, 0.0, 0)
        # complete graph: neighbors' initial positions with mass 1/4 each
        np.testing.assert_allclose(m.x, labels.labels[1:])
        np.testing.assert_allclose(m.w, 0.25)


class TestObjectives:
    def test_constant_running_reward_integrates_to_T(self):
        xi, labels, _ = lone_player_setup()
        model = ModelSpec(
            name="unit-f",
            b=lambda t, x, a: a,
            f=lambda t, x, m, a: 1.0 + 0.0 * x,
            g=lambda x, m: 0.0 * x,
            sigma=0.3,
            a_min=-1.0, a_max=1.0, n_actions=3,
            x_min=-5.0, x_max=5.0,
            kernel=constant_kernel(0.0),
            initial=independent_law("point", 0.0),
            f_uses_measure=False, g_uses_measure=False,
        )
        res = simulate(xi, labels, zero_profile(1), model, paths=50, dt=0.01, seed=7, T=1.0)
        j, se = objective(res, 0)
        assert j == pytest.approx(1.0, abs=1e-12)
        assert se == pytest.approx(0.0, abs=1e-12)

    def test_time_dependent_f_exact_quadrature_zero_stderr(self):
        xi, labels, _ = lone_player_setup()
        model = ModelSpec(
            name="time-f",
            b=lambda t, x, a: 0.0 * a,
            f=lambda t, x, m, a: t + 0.0 * x,
            g=lambda x, m: 0.0 * x,
            sigma=0.0,
            a_min=-1.0, a_max=1.0, n_actions=3,
            x_min=-5.0, x_max=5.0,
            kernel=constant_kernel(0.0),
            initial=independent_law("point", 0.0),
            f_uses_measure=False, g_uses_measure=False,
        )
        res = simulate(xi, labels, zero_profile(1), model, paths=20, dt=0.125, seed=8, T=1.0)
        j, se = objective(res, 0)
        assert j == pytest.approx(0.5, abs=1e-12)  # trapezoid exact for linear t
        assert se == 0.0

    def test_lq_objective_nonpositive(self):
        n = 8
        xi = erdos_renyi(n, 0.8, seed=15)
        labels = LabelAssignment.midpoint(n)
        params = LQParams(
            c=1.0, T=1.0, sigma=0.3, kernel=constant_kernel(1.0),
            initial=independent_law("uniform", 0.0, 1.0),
        )
        sol = solve_lq(params, 16)
        res = simulate(xi, labels, lq_profile(sol, labels), params, paths=300, dt=0.02, seed=16)
        assert np.all(res.objectives <= 0.0)

    def test_stderr_scaling_with_paths(self):
        xi, labels, params = lone_player_setup()
        sol = solve_lq(
            LQParams(c=1.0, T=1.0, sigma=0.4, kernel=constant_kernel(0.0),
                     initial=independent_law("point", 0.0)), 4)
        prof = lq_profile(sol, labels)
        ses = []
        for paths in (500, 2000):
            r = simulate(xi, labels, prof, params, paths=paths, dt=0.02, seed=21)
            ses.append(r.stderr[0])
        ratio = ses[0] / ses[1]
        assert 2.0 * 0.8 <= ratio <= 2.0 * 1.2  # doubling paths twice halves stderr

    def test_midpoint_vs_random_labels_identical_for_blockwise_control(self):
        # controls constant on cells: label scheme inside the cell is irrelevant
        n = 6
        xi = erdos_renyi(n, 0.6, seed=23)
        params = LQParams(
            c=1.0, T=0.5, sigma=0.2, kernel=constant_kernel(1.0),
            initial=independent_law("point", 0.3),
        )
        sol = solve_lq(params, n)  # L = n: one cell per player
        mid = LabelAssignment.midpoint(n)
        rand = LabelAssignment.random_per_cell(n, seed=29)
        ra = simulate(xi, mid, lq_profile(sol, mid), params, paths=100, dt=0.05, seed=31)
        rb = simulate(xi, rand, lq_profile(sol, rand), params, paths=100, dt=0.05, seed=31)
        np.testing.assert_array_equal(ra.objectives, rb.objectives)


class TestReplay:
    def test_replay_matches_full_resimulation(self):
        n = 5
        xi = erdos_renyi(n, 0.8, seed=41)
        labels = LabelAssignment.midpoint(n)
        params = LQParams(
            c=1.0, T=1.0, sigma=0.3, kernel=constant_kernel(1.0),
            initial=independent_law("uniform", 0.0, 1.0),
        )
        sol = solve_lq(params, n)
        base = lq_profile(sol, labels)
        rule = ExplicitRule(lambda t, x: 0.8 * (0.2 - x))
        i = 3
        full = simulate(
            xi, labels, base.with_deviation(i, rule), params, paths=200, dt=0.02, seed=43
        )
        incumbent = simulate(xi, labels, base, params, paths=200, dt=0.02, seed=43)
        fast = replay_player(
            xi, labels, rule, i, params, 200, 0.02, 43,
            incumbent.terminal_neighborhood_means,
        )
        np.testing.assert_allclose(fast, full.per_path_objectives[:, i], atol=1e-12)

    def test_replay_rejects_measure_coupled_running_reward(self):
        xi, labels, _ = lone_player_setup()
        model = ModelSpec(
            name="crowd",
            b=lambda t, x, a: a,
            f=lambda t, x, m, a: -m.mass() + 0.0 * x,
            g=lambda x, m: 0.0 * x,
            sigma=0.3,
            a_min=-1.0, a_max=1.0, n_actions=3,
            x_min=-5.0, x_max=5.0,
            kernel=constant_kernel(1.0),
            initial=independent_law("point", 0.0),
            f_uses_measure=True, g_uses_measure=False,
        )
        with pytest.raises(ValueError):
            replay_player(xi, labels, ExplicitRule(lambda t, x: 0 * x), 0, model,
                          10, 0.1, 1, np.zeros((10, 1)), T=1.0)


class TestFieldControl:
    def test_lookup_conventions(self):
        from graphon_games.initial import independent_law
        from graphon_games.mfg import make_model, solve_fixed_point

        model = make_model(
            "decoupled_test", constant_kernel(1.0), independent_law("point", 0.5),
            n_actions=41,
        )
        field = solve_fixed_point(model, K=10, L=2, J=30, theta=1.0, max_iter=2, tol=1e9)
        ctrl = field_control(field)
        # nearest label cell, linear in x, left-constant in t
        x = np.array([0.0, 0.5])
        v1 = ctrl(0.0, 0.2, x)
        v2 = ctrl(0.049, 0.2, x)  # same node interval as t = 0
        np.testing.assert_array_equal(v1, v2)
        j = 12
        exact = field.alpha[3, 1, j]
        assert ctrl(field.times[3], 0.9, field.x_grid[j]) == pytest.approx(exact)
