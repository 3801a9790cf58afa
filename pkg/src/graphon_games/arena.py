"""n-player game simulation under assigned strategy profiles.

Simulates the coupled SDE system ``dX_i = b(t, X_i, alpha_i) dt + sigma dB_i``
with independent Brownian motions and per-player initial conditions
``X_i(0) ~ lambda_{u_i}``, and accumulates each player's objective

    J_i = E[ int_0^T f(t, X_i, M_i(t), alpha_i) dt + g(X_i(T), M_i(T)) ]

with the neighborhood empirical measures ``M_i = (1/n) sum_j xi_ij delta_{X_j}``
entering only through the objectives (the drift carries no interaction term).
Because the diagonal of the interaction matrix vanishes, M_i never depends on
player i's own rule, so a deviation by one player can be re-simulated as a
single-coordinate replay under the same per-player noise streams (common
random numbers); co-players' paths and all neighborhood measures are bitwise
unchanged.

Controls are Markovian and decentralized: each rule reads only the owner's
coordinate.  Time integrals use trapezoidal weights with compensated (Kahan)
accumulation so reductions are reproducible in a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .initial import InitialLaw
from .lq import LQParams, LQSolution
from .measures import ParticleMeasure
from .mfg import EquilibriumField, ModelSpec
from .networks import InteractionMatrix, LabelAssignment
from .seeds import spawn_rngs

__all__ = [
    "StrategyProfile",
    "TrackingProfile",
    "GraphonControlRule",
    "ExplicitRule",
    "SimulationResult",
    "simulate",
    "replay_player",
    "objective",
    "field_control",
    "lq_control",
]


# ---------------------------------------------------------------------------
# Dynamics resolution: ModelSpec or LQParams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Dynamics:
    b: Callable
    f: Callable
    g: Callable
    sigma: float
    initial: InitialLaw
    f_uses_measure: bool
    g_uses_measure: bool
    T: Optional[float]


def _resolve_dynamics(model) -> _Dynamics:
    if isinstance(model, ModelSpec):
        return _Dynamics(
            b=model.b,
            f=model.f,
            g=model.g,
            sigma=model.sigma,
            initial=model.initial,
            f_uses_measure=model.f_uses_measure,
            g_uses_measure=model.g_uses_measure,
            T=None,
        )
    if isinstance(model, LQParams):
        c = model.c
        return _Dynamics(
            b=lambda t, x, a: a,
            f=lambda t, x, m, a: -0.5 * a**2,
            g=lambda x, m: -0.5 * c * (x - m.mean()) ** 2,
            sigma=model.sigma,
            initial=model.initial,
            f_uses_measure=False,
            g_uses_measure=True,
            T=model.T,
        )
    raise TypeError("model must be a ModelSpec or LQParams")


class _ArrayStats:
    """Measure-statistics view whose mean/mass broadcast over paths/players."""

    __slots__ = ("_mean", "_mass")

    def __init__(self, mean, mass):
        self._mean = mean
        self._mass = mass

    def mean(self):
        return self._mean

    def mass(self):
        return self._mass


# ---------------------------------------------------------------------------
# Control rules and profiles
# ---------------------------------------------------------------------------


class GraphonControlRule:
    """alpha_i(t, x_vec) = alpha*(t, u_i, x_i): decentralized by construction."""

    def __init__(self, control: Callable, label: float):
        self.control = control
        self.label = label

    def act(self, t: float, x_own: np.ndarray) -> np.ndarray:
        return self.control(t, self.label, x_own) * np.ones_like(x_own)


class ExplicitRule:
    """Tabulated or closed-form (t, x) policy for a single player."""

    def __init__(self, func: Callable):
        self.func = func

    def act(self, t: float, x_own: np.ndarray) -> np.ndarray:
        return self.func(t, x_own) * np.ones_like(x_own)


class StrategyProfile:
    """Exactly one control rule per player."""

    def __init__(self, rules):
        self.rules = list(rules)

    @property
    def n(self) -> int:
        return len(self.rules)

    def act_matrix(self, t: float, X: np.ndarray) -> np.ndarray:
        out = np.empty_like(X)
        for i, rule in enumerate(self.rules):
            out[:, i] = rule.act(t, X[:, i])
        return out

    def with_deviation(self, i: int, rule) -> "StrategyProfile":
        if not 0 <= i < self.n:
            raise ValueError("deviating player index out of range")
        return _DeviatedProfile(self, i, rule)

    @staticmethod
    def from_graphon_control(control: Callable, labels: LabelAssignment) -> "StrategyProfile":
        return StrategyProfile([GraphonControlRule(control, u) for u in labels.labels])


class TrackingProfile(StrategyProfile):
    """Vectorized profile alpha_i = gain(t) (target_i - x_i) (the LQ shape)."""

    def __init__(self, gain: Callable, targets: np.ndarray):
        self.gain = gain
        self.targets = np.asarray(targets, dtype=float)
        super().__init__(
            [ExplicitRule(self._rule_for(i)) for i in range(self.targets.size)]
        )

    def _rule_for(self, i: int) -> Callable:
        return lambda t, x: self.gain(t) * (self.targets[i] - x)

    def act_matrix(self, t: float, X: np.ndarray) -> np.ndarray:
        return self.gain(t) * (self.targets[None, :] - X)


class _DeviatedProfile(StrategyProfile):
    def __init__(self, base: StrategyProfile, i: int, rule):
        self.base = base
        self.i = i
        self.rule = rule
        rules = list(base.rules)
        rules[i] = rule
        super().__init__(rules)

    def act_matrix(self, t: float, X: np.ndarray) -> np.ndarray:
        out = self.base.act_matrix(t, X)
        out[:, self.i] = self.rule.act(t, X[:, self.i])
        return out


def lq_control(sol: LQSolution) -> Callable:
    """Closed-form equilibrium control (t, u, x) -> phi(t)(M(u) - x)."""
    return sol.control


def field_control(field: EquilibriumField) -> Callable:
    """Control lookup in a solved field: left-constant in t, nearest label
    cell, linear interpolation in the state."""

    times = field.times
    x_grid = field.x_grid

    def control(t, u, x):
        k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 1))
        l = int(field.grid.cell_of(u))
        return np.interp(x, x_grid, field.alpha[k, l])

    return control


def lq_profile(sol: LQSolution, labels: LabelAssignment) -> TrackingProfile:
    """Equilibrium profile for the LQ game: phi(t)(M(u_i) - x)."""
    return TrackingProfile(sol.phi, sol.M_at(labels.labels))


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


@dataclass
class SimulationResult:
    """Monte-Carlo paths and per-player objective estimates."""

    times: np.ndarray
    labels: LabelAssignment
    objectives: np.ndarray
    stderr: np.ndarray
    per_path_objectives: Optional[np.ndarray] = None
    terminal_states: Optional[np.ndarray] = None
    terminal_neighborhood_means: Optional[np.ndarray] = None
    mean_state_history: Optional[np.ndarray] = None
    snapshots: dict = field(default_factory=dict)
    paths_array: Optional[np.ndarray] = None

    def neighborhood_measure(self, xi: InteractionMatrix, t: float, i: int, path: int = 0) -> ParticleMeasure:
        """Neighborhood measure of player i on one stored snapshot path."""
        if t not in self.snapshots:
            raise KeyError(f"no snapshot stored at t = {t}")
        states = self.snapshots[t][path]
        return ParticleMeasure(states, xi.entries[i] / xi.n)


def objective(result: SimulationResult, i: int) -> tuple[float, float]:
    """Player i's Monte-Carlo objective estimate and its standard error."""
    return float(result.objectives[i]), float(result.stderr[i])


def _kahan_add(acc: np.ndarray, comp: np.ndarray, term: np.ndarray) -> None:
    y = term - comp
    t = acc + y
    comp[...] = (t - acc) - y
    acc[...] = t


def _trapezoid_weight(k: int, steps: int, h: float) -> float:
    return 0.5 * h if k in (0, steps) else h


def simulate(
    xi: InteractionMatrix,
    labels: LabelAssignment,
    profile: StrategyProfile,
    model,
    paths: int,
    dt: float,
    seed: int,
    T: Optional[float] = None,
    snapshot_times=(),
    store_paths: bool = False,
    store_per_path: bool = True,
) -> SimulationResult:
    """Euler-Maruyama simulation of the n-player game under a profile.

    Per-player noise and initial draws come from per-player substreams of the
    root seed, so reruns are bit-identical and single-player deviations can be
    replayed against frozen co-players.  Objectives use trapezoidal time
    weights over the simulation nodes.
    """
    if dt <= 0 or paths <= 0:
        raise ValueError("dt and paths must be positive")
    dyn = _resolve_dynamics(model)
    horizon = T if T is not None else dyn.T
    if horizon is None:
        raise ValueError("a horizon T is required for this model")
    n = xi.n
    if labels.n != n or profile.n != n:
        raise ValueError("labels and profile must match the matrix size")
    steps = max(1, int(round(horizon / dt)))
    h = horizon / steps
    times = np.linspace(0.0, horizon, steps + 1)

    init_rngs = spawn_rngs(seed, "arena.init", n)
    noise_rngs = spawn_rngs(seed, "arena.noise", n)

    X = np.empty((paths, n))
    for i in range(n):
        X[:, i] = dyn.initial.sample(np.full(paths, labels.labels[i]), init_rngs[i])

    row_masses = xi.entries.sum(axis=1) / n
    running = np.zeros((paths, n))
    comp = np.zeros((paths, n))
    snapshots = {}
    snap_idx = {int(round(t / h)): t for t in snapshot_times}
    paths_store = np.empty((paths, steps + 1, n)) if store_paths else None
    mean_hist = np.empty((steps + 1, n))
    sqrt_h = np.sqrt(h)

    for k in range(steps + 1):
        t = times[k]
        A = profile.act_matrix(t, X)
        if dyn.f_uses_measure:
            means = (X @ xi.entries.T) / n
            stats = _ArrayStats(means, row_masses[None, :])
        else:
            stats = _ArrayStats(None, None)
        fvals = dyn.f(t, X, stats, A) * np.ones_like(X)
        _kahan_add(running, comp, _trapezoid_weight(k, steps, h) * fvals)
        mean_hist[k] = X.mean(axis=0)
        if store_paths:
            paths_store[:, k, :] = X
        if k in snap_idx:
            snapshots[snap_idx[k]] = X.copy()
        if k < steps:
            drift = dyn.b(t, X, A) * np.ones_like(X)
            X = X + drift * h
            if dyn.sigma > 0:
                noise = np.empty_like(X)
                for i in range(n):
                    noise[:, i] = noise_rngs[i].standard_normal(paths)
                X = X + dyn.sigma * sqrt_h * noise

    terminal_means = (X @ xi.entries.T) / n
    stats_T = _ArrayStats(terminal_means, row_masses[None, :])
    per_path = running + dyn.g(X, stats_T) * np.ones_like(X)
    objectives = per_path.mean(axis=0)
    stderr = per_path.std(axis=0, ddof=1) / np.sqrt(paths)
    return SimulationResult(
        times=times,
        labels=labels,
        objectives=objectives,
        stderr=stderr,
        per_path_objectives=per_path if store_per_path else None,
        terminal_states=X,
        terminal_neighborhood_means=terminal_means,
        mean_state_history=mean_hist,
        snapshots=snapshots,
        paths_array=paths_store,
    )


def replay_player(
    xi: InteractionMatrix,
    labels: LabelAssignment,
    rule,
    i: int,
    model,
    paths: int,
    dt: float,
    seed: int,
    terminal_neighborhood_means: np.ndarray,
    T: Optional[float] = None,
) -> np.ndarray:
    """Per-path objective of player i under a replacement rule.

    Re-simulates only coordinate i with the same noise substream as the full
    run with ``seed``; valid because the drift has no measure coupling, the
    running reward ignores the neighborhood measure, and the zero diagonal
    makes ``M_i`` independent of player i's own rule.  The terminal
    neighborhood means must come from the incumbent simulation.
    """
    dyn = _resolve_dynamics(model)
    if dyn.f_uses_measure:
        raise ValueError(
            "single-coordinate replay requires a running reward without "
            "measure coupling; re-simulate the full profile instead"
        )
    horizon = T if T is not None else dyn.T
    n = xi.n
    steps = max(1, int(round(horizon / dt)))
    h = horizon / steps
    init_rng = spawn_rngs(seed, "arena.init", n)[i]
    noise_rng = spawn_rngs(seed, "arena.noise", n)[i]

    x = dyn.initial.sample(np.full(paths, labels.labels[i]), init_rng)
    running = np.zeros(paths)
    comp = np.zeros(paths)
    stats = _ArrayStats(None, None)
    sqrt_h = np.sqrt(h)
    for k in range(steps + 1):
        t = k * h
        a = rule.act(t, x)
        fvals = dyn.f(t, x, stats, a) * np.ones_like(x)
        _kahan_add(running, comp, _trapezoid_weight(k, steps, h) * fvals)
        if k < steps:
            x = x + dyn.b(t, x, a) * np.ones_like(x) * h
            if dyn.sigma > 0:
                x = x + dyn.sigma * sqrt_h * noise_rng.standard_normal(paths)

    mass_i = xi.entries[i].sum() / n
    stats_T = _ArrayStats(terminal_neighborhood_means[:, i], mass_i)
    return running + dyn.g(x, stats_T) * np.ones_like(x)
