"""Forward-backward PDE solver for bounded graphon games.

The equilibrium fixed point couples, for each label u, a backward HJB
equation for the value v(t,u,x)

    0 = dv/dt + sup_a [ b(t,x,a) dv/dx + f(t, x, Wmu_t(u), a) ] + (sigma^2/2) d2v/dx2

with terminal condition g(x, Wmu_T(u)), and a forward Fokker-Planck
transport of the per-label density under the argmax control.  There are no
label derivatives, so label cells decouple given the measure flow and the
solver sweeps them jointly as array dimensions.

Discretization: the state is truncated to a box with no-flux boundaries
(mass confinement is validated by the reported boundary mass); actions live
on a uniform grid and the Hamiltonian supremum is a grid scan with ties
broken toward the smallest action; advection uses one-sided differences
selected by the drift sign (backward pass) and donor-cell fluxes (forward
pass) with automatic time-substepping when the CFL bound is violated;
diffusion is implicit.  The measure flow is updated by damped Picard
iteration and the stopping rule is an exact bounded-Lipschitz distance
between successive flows, summed over label cells and maximized over time
nodes (cheap upper bounds prune the exact evaluations).  Non-convergence is
a legal, flagged outcome: existence of the fixed point is known but no
constructive convergence guarantee is.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .initial import InitialLaw
from .kernels import Kernel, LabelGrid, grid_matrix, psd_check
from .measures import LabelStateMeasure, MeasureFlow, ParticleMeasure, _maximize_chain

__all__ = [
    "ModelSpec",
    "EquilibriumField",
    "FixedPointDiagnostics",
    "MassConservationError",
    "make_model",
    "hjb_backward",
    "fp_forward",
    "solve_fixed_point",
    "policy_evaluation",
    "product_structure_check",
    "flow_distance",
]


@dataclass(frozen=True)
class ModelSpec:
    """A bounded graphon-game model on a truncated state box.

    ``b(t, x, a)``, ``f(t, x, m, a)`` and ``g(x, m)`` must accept numpy
    arrays in ``x`` and ``a`` (broadcasting) and read the measure argument
    ``m`` only through its ``mean()`` / ``mass()`` / ``atoms()`` interface.
    ``sigma`` is a positive constant; the action set is the grid of
    ``n_actions`` points on [a_min, a_max].
    """

    name: str
    b: Callable
    f: Callable
    g: Callable
    sigma: float
    a_min: float
    a_max: float
    n_actions: int
    x_min: float
    x_max: float
    kernel: Kernel
    initial: InitialLaw
    f_uses_measure: bool = True
    g_uses_measure: bool = True

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive (uniform nondegeneracy)")
        if self.n_actions < 2:
            raise ValueError("action grid needs at least 2 points")
        if not (self.a_min < self.a_max and self.x_min < self.x_max):
            raise ValueError("action and state boxes must be nondegenerate")

    @property
    def actions(self) -> np.ndarray:
        return np.linspace(self.a_min, self.a_max, self.n_actions)

    @property
    def midpoint_action(self) -> float:
        return 0.5 * (self.a_min + self.a_max)


class _GridMeasure:
    """ParticleMeasure-compatible view of atom masses on the state grid."""

    __slots__ = ("x", "w")

    def __init__(self, x: np.ndarray, w: np.ndarray):
        self.x = x
        self.w = w

    def mass(self) -> float:
        return float(self.w.sum())

    def mean(self) -> float:
        return float(self.w @ self.x)

    def atoms(self) -> ParticleMeasure:
        return ParticleMeasure(self.x, np.maximum(self.w, 0.0))


class MassConservationError(RuntimeError):
    """Per-step mass drift exceeded the conservation contract."""

    def __init__(self, step: int, label: int, drift: float):
        self.step = step
        self.label = label
        self.drift = drift
        super().__init__(
            f"mass drift {drift:.3e} at step {step}, label cell {label} exceeds 1e-6"
        )


@dataclass
class FixedPointDiagnostics:
    iterations: int = 0
    gap_history: list = field(default_factory=list)
    converged: bool = False
    boundary_mass: float = 0.0
    monotonicity_psd: Optional[bool] = None
    hjb_max_substeps: int = 1
    fp_max_substeps: int = 1


@dataclass
class EquilibriumField:
    """Solution arrays on the time x label x state grid.

    ``rho`` holds per-label densities with ``sum_j rho[k,l,j] dx = 1/L`` for
    every time node and label; ``v`` satisfies the terminal condition
    ``v[K] = g(x, Wmu_T(u))`` exactly on the grid; ``alpha`` is the argmax
    control at every node.
    """

    times: np.ndarray
    grid: LabelGrid
    x_grid: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    rho: np.ndarray
    diagnostics: FixedPointDiagnostics

    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])

    def label_masses(self, k: int) -> np.ndarray:
        return self.rho[k].sum(axis=1) * self.dx

    def second_marginal(self, k: int) -> ParticleMeasure:
        w = self.rho[k].sum(axis=0) * self.dx
        return ParticleMeasure(self.x_grid, w)

    def conditional_state_measure(self, k: int, label_cell: int) -> ParticleMeasure:
        w = self.rho[k, label_cell] * self.dx
        total = w.sum()
        if total <= 0:
            return ParticleMeasure.zero()
        return ParticleMeasure(self.x_grid, w / total)

    def flow(self) -> MeasureFlow:
        L = self.grid.ncells
        u = np.repeat(self.grid.midpoints, self.x_grid.size)
        x = np.tile(self.x_grid, L)
        measures = [
            LabelStateMeasure(u, x, (self.rho[k] * self.dx).ravel())
            for k in range(self.times.size)
        ]
        return MeasureFlow(self.times, measures)


# ---------------------------------------------------------------------------
# Measure coupling
# ---------------------------------------------------------------------------


class _Coupling:
    """Neighborhood measures Wmu_t(u_l) for every time node and label cell."""

    def __init__(self, x_grid: np.ndarray, weights: np.ndarray):
        self.x_grid = x_grid
        self.weights = weights  # (K+1, L, J) atom masses

    @property
    def ncells(self) -> int:
        return self.weights.shape[1]

    def view(self, k: int, l: int) -> _GridMeasure:
        return _GridMeasure(self.x_grid, self.weights[k, l])


class _StatView:
    """Measure stand-in carrying only scalar statistics."""

    __slots__ = ("_mean", "_mass")

    def __init__(self, mean: float, mass: float):
        self._mean = mean
        self._mass = mass

    def mean(self) -> float:
        return self._mean

    def mass(self) -> float:
        return self._mass


class _StatCoupling:
    """Coupling given by per-node scalar statistics instead of grid atoms.

    Suffices for models that read the measure only through mean and mass;
    used by the single-agent best-response solves.
    """

    def __init__(self, means: np.ndarray, masses: np.ndarray):
        self.means = np.asarray(means, dtype=float)
        self.masses = np.asarray(masses, dtype=float)

    @property
    def ncells(self) -> int:
        return self.means.shape[1]

    def view(self, k: int, l: int) -> _StatView:
        return _StatView(float(self.means[k, l]), float(self.masses[k, l]))


def _coupling_from_rho(kernel: Kernel, grid: LabelGrid, x_grid: np.ndarray, rho: np.ndarray) -> _Coupling:
    Wg = grid_matrix(kernel, grid)  # (L, L), no cell weight: rho already carries 1/L
    dx = x_grid[1] - x_grid[0]
    weights = dx * np.einsum("lm,kmj->klj", Wg, rho)
    return _Coupling(x_grid, weights)


def _coupling_from_flow(kernel: Kernel, grid: LabelGrid, x_grid: np.ndarray, flow: MeasureFlow) -> _Coupling:
    K1 = flow.times.size
    L, J = grid.ncells, x_grid.size
    dx = x_grid[1] - x_grid[0]
    weights = np.zeros((K1, L, J))
    mids = grid.midpoints
    for k, m in enumerate(flow.measures):
        if m.natoms == 0:
            continue
        wk = kernel(mids[:, None], m.u[None, :]) * m.w[None, :]  # (L, natoms)
        idx = np.clip(np.rint((m.x - x_grid[0]) / dx).astype(int), 0, J - 1)
        np.add.at(weights[k], (slice(None), idx), wk)
    return _Coupling(x_grid, weights)


# ---------------------------------------------------------------------------
# Backward HJB sweep
# ---------------------------------------------------------------------------


def _neumann_diffusion_ab(J: int, coef: float) -> np.ndarray:
    """Banded form of I - coef * Lap with no-flux (reflecting) boundaries."""
    ab = np.zeros((3, J))
    ab[0, 1:] = -coef
    ab[2, :-1] = -coef
    ab[1, :] = 1.0 + 2.0 * coef
    ab[1, 0] = 1.0 + coef
    ab[1, -1] = 1.0 + coef
    return ab


def _one_sided_differences(v: np.ndarray, dx: float):
    # v: (L, J); forward difference vanishes at the right edge, backward at the left
    Dp = np.zeros_like(v)
    Dm = np.zeros_like(v)
    Dp[:, :-1] = (v[:, 1:] - v[:, :-1]) / dx
    Dm[:, 1:] = (v[:, 1:] - v[:, :-1]) / dx
    return Dp, Dm


@dataclass
class _FrozenPolicy:
    """A control field with its drift parts and running reward at fixed t."""

    control: np.ndarray
    bp: np.ndarray
    bm: np.ndarray
    f: np.ndarray

    def hamiltonian(self, v: np.ndarray, dx: float) -> np.ndarray:
        Dp, Dm = _one_sided_differences(v, dx)
        return self.bp * Dp + self.bm * Dm + self.f


def _hamiltonian_scan(model: ModelSpec, t: float, x_grid: np.ndarray, v: np.ndarray, coupling_views):
    """Grid-scan maximization of the Hamiltonian per (label, state) node.

    Returns the argmax control (first maximum = smallest action) together
    with the drift up/down parts and running reward frozen at the argmax, so
    CFL substeps can re-evaluate the Hamiltonian under the same policy.
    """
    L, J = v.shape
    dx = x_grid[1] - x_grid[0]
    actions = model.actions
    Dp, Dm = _one_sided_differences(v, dx)
    bvals = model.b(t, x_grid[:, None], actions[None, :]) * np.ones((J, actions.size))
    bp = np.maximum(bvals, 0.0)
    bm = np.minimum(bvals, 0.0)
    q = bp[None, :, :] * Dp[:, :, None] + bm[None, :, :] * Dm[:, :, None]
    f_arr = np.empty((L, J, actions.size))
    for l in range(L):
        fl = model.f(t, x_grid[:, None], coupling_views[l], actions[None, :])
        f_arr[l] = np.broadcast_to(fl, (J, actions.size))
    q += f_arr
    idx = np.argmax(q, axis=2)[:, :, None]
    take = np.take_along_axis(q, idx, axis=2)[:, :, 0]
    frozen = _FrozenPolicy(
        control=actions[idx[:, :, 0]],
        bp=np.take_along_axis(np.broadcast_to(bp, (L, J, actions.size)), idx, axis=2)[:, :, 0],
        bm=np.take_along_axis(np.broadcast_to(bm, (L, J, actions.size)), idx, axis=2)[:, :, 0],
        f=np.take_along_axis(f_arr, idx, axis=2)[:, :, 0],
    )
    return frozen, take, float(np.abs(bvals).max())


def _hjb_sweep(
    model: ModelSpec,
    times: np.ndarray,
    x_grid: np.ndarray,
    coupling,
    cfl_target: float = 0.9,
):
    K1 = times.size
    L = coupling.ncells
    J = x_grid.size
    dx = float(x_grid[1] - x_grid[0])
    nu = 0.5 * model.sigma**2
    v = np.zeros((K1, L, J))
    alpha = np.zeros((K1, L, J))

    views_T = [coupling.view(K1 - 1, l) for l in range(L)]
    for l in range(L):
        v[K1 - 1, l] = model.g(x_grid, views_T[l]) * np.ones(J)

    ab_cache: dict[float, np.ndarray] = {}
    max_substeps = 1
    for k in range(K1 - 1, 0, -1):
        dt = float(times[k] - times[k - 1])
        t = float(times[k])
        views = [coupling.view(k, l) for l in range(L)]
        policy, H, bmax = _hamiltonian_scan(model, t, x_grid, v[k], views)
        alpha[k] = policy.control
        substeps = max(1, int(np.ceil(dt * bmax / (cfl_target * dx)))) if bmax > 0 else 1
        max_substeps = max(max_substeps, substeps)
        h = dt / substeps
        ab = ab_cache.get(h)
        if ab is None:
            ab = ab_cache[h] = _neumann_diffusion_ab(J, nu * h / dx**2)
        cur = v[k]
        for s in range(substeps):
            if s > 0:
                H = policy.hamiltonian(cur, dx)
            star = cur + h * H
            cur = solve_banded((1, 1), ab, star.T).T
        v[k - 1] = cur
    views0 = [coupling.view(0, l) for l in range(L)]
    policy0, _, _ = _hamiltonian_scan(model, float(times[0]), x_grid, v[0], views0)
    alpha[0] = policy0.control
    return v, alpha, max_substeps


def policy_evaluation(model: ModelSpec, field: EquilibriumField, control: np.ndarray) -> np.ndarray:
    """Value of a fixed control field against the field's measure flow.

    Runs the same implicit-diffusion/explicit-advection backward sweep as the
    optimal solve but with the Hamiltonian replaced by the fixed policy's
    reward; upwinding still follows the drift sign.  Evaluating the solver's
    own argmax control reproduces the solver's value array.
    """
    times, x_grid, grid = field.times, field.x_grid, field.grid
    coupling = _coupling_from_rho(model.kernel, grid, x_grid, field.rho)
    K1 = times.size
    L, J = grid.ncells, x_grid.size
    dx = float(x_grid[1] - x_grid[0])
    nu = 0.5 * model.sigma**2
    v = np.zeros((K1, L, J))
    for l in range(L):
        v[K1 - 1, l] = model.g(x_grid, coupling.view(K1 - 1, l)) * np.ones(J)
    ab_cache: dict[float, np.ndarray] = {}
    for k in range(K1 - 1, 0, -1):
        dt = float(times[k] - times[k - 1])
        t = float(times[k])
        pi = control[k]
        bvals = model.b(t, x_grid[None, :], pi) * np.ones((L, J))
        f_pi = np.empty((L, J))
        for l in range(L):
            f_pi[l] = model.f(t, x_grid, coupling.view(k, l), pi[l]) * np.ones(J)
        policy = _FrozenPolicy(
            control=pi,
            bp=np.maximum(bvals, 0.0),
            bm=np.minimum(bvals, 0.0),
            f=f_pi,
        )
        # substep count mirrors the optimal sweep: CFL bound over the whole
        # action grid, so evaluating the solver's own argmax control
        # reproduces the solver's value array exactly
        grid_b = model.b(t, x_grid[:, None], model.actions[None, :]) * np.ones(
            (J, model.actions.size)
        )
        bmax = float(np.abs(grid_b).max())
        substeps = max(1, int(np.ceil(dt * bmax / (0.9 * dx)))) if bmax > 0 else 1
        h = dt / substeps
        ab = ab_cache.get(h)
        if ab is None:
            ab = ab_cache[h] = _neumann_diffusion_ab(J, nu * h / dx**2)
        cur = v[k]
        for _ in range(substeps):
            H = policy.hamiltonian(cur, dx)
            cur = solve_banded((1, 1), ab, (cur + h * H).T).T
        v[k - 1] = cur
    return v


def hjb_backward(model: ModelSpec, flow: MeasureFlow, L: int, J: int):
    """Backward value sweep against a frozen measure flow.

    Returns the value and argmax-control arrays on the (time, label, state)
    grid defined by the flow's time nodes, L label cells and J state cells.
    Label cells never couple: the equation has no label derivatives.
    """
    grid = LabelGrid(L)
    x_grid = np.linspace(model.x_min, model.x_max, J)
    coupling = _coupling_from_flow(model.kernel, grid, x_grid, flow)
    v, alpha, _ = _hjb_sweep(model, flow.times, x_grid, coupling)
    return v, alpha


# ---------------------------------------------------------------------------
# Forward Fokker-Planck sweep
# ---------------------------------------------------------------------------


def _fp_sweep(
    model: ModelSpec,
    times: np.ndarray,
    x_grid: np.ndarray,
    grid: LabelGrid,
    alpha: np.ndarray,
    cfl_target: float = 0.45,
):
    K1 = times.size
    L = grid.ncells
    J = x_grid.size
    dx = float(x_grid[1] - x_grid[0])
    nu = 0.5 * model.sigma**2
    rho = np.zeros((K1, L, J))
    rho[0] = model.initial.density_on_grid(grid, x_grid) * grid.weight

    ab_cache: dict[float, np.ndarray] = {}
    max_substeps = 1
    for k in range(K1 - 1):
        dt = float(times[k + 1] - times[k])
        t = float(times[k])
        bcell = model.b(t, x_grid[None, :], alpha[k]) * np.ones((L, J))
        uf = 0.5 * (bcell[:, :-1] + bcell[:, 1:])  # face velocities, no-flux outside
        umax = float(np.abs(uf).max()) if uf.size else 0.0
        substeps = max(1, int(np.ceil(dt * umax / (cfl_target * dx)))) if umax > 0 else 1
        max_substeps = max(max_substeps, substeps)
        h = dt / substeps
        ab = ab_cache.get(h)
        if ab is None:
            ab = ab_cache[h] = _neumann_diffusion_ab(J, nu * h / dx**2)
        cur = rho[k]
        target_mass = cur.sum(axis=1) * dx
        for _ in range(substeps):
            flux = np.maximum(uf, 0.0) * cur[:, :-1] + np.minimum(uf, 0.0) * cur[:, 1:]
            upd = cur.copy()
            upd[:, :-1] -= (h / dx) * flux
            upd[:, 1:] += (h / dx) * flux
            cur = solve_banded((1, 1), ab, upd.T).T
            drift = np.abs(cur.sum(axis=1) * dx - target_mass)
            bad = int(np.argmax(drift))
            if drift[bad] > 1e-6:
                raise MassConservationError(k, bad, float(drift[bad]))
        rho[k + 1] = np.maximum(cur, 0.0)
    return rho, max_substeps


def fp_forward(model: ModelSpec, times: np.ndarray, control: np.ndarray, L: int, J: int) -> MeasureFlow:
    """Forward density transport under a control field.

    Conservative donor-cell advection plus implicit diffusion from the
    per-label initial densities, no-flux at the truncation box.  Returns the
    flow of label-state measures (grid atoms weighted by density * dx / L).
    """
    grid = LabelGrid(L)
    x_grid = np.linspace(model.x_min, model.x_max, J)
    rho, _ = _fp_sweep(model, times, x_grid, grid, control)
    field = EquilibriumField(
        times=np.asarray(times, dtype=float),
        grid=grid,
        x_grid=x_grid,
        v=np.zeros_like(rho),
        alpha=control,
        rho=rho,
        diagnostics=FixedPointDiagnostics(),
    )
    return field.flow()


# ---------------------------------------------------------------------------
# Flow distance (exact grid-BL with upper-bound pruning)
# ---------------------------------------------------------------------------


def _node_upper_bounds(c: np.ndarray, dx: float) -> np.ndarray:
    """Per-time-node upper bound on the label-summed BL distance.

    ``c`` holds signed atom masses (K+1, L, J) on a uniform grid; per label
    min(sum |c|, |sum c| + dx * sum |tail sums|), summed over labels.
    """
    mass_bound = np.abs(c).sum(axis=2)
    tails = np.cumsum(c[:, :, ::-1], axis=2)[:, :, ::-1]
    lip_bound = np.abs(c.sum(axis=2)) + dx * np.abs(tails[:, :, 1:]).sum(axis=2)
    return np.minimum(mass_bound, lip_bound).sum(axis=1)


def _node_exact_distance(c_node: np.ndarray, x_grid: np.ndarray) -> float:
    total = 0.0
    for cl in c_node:
        nz = cl != 0.0
        if not nz.any():
            continue
        total += _maximize_chain(x_grid[nz], cl[nz])
    return total


def flow_distance(
    rho_a: np.ndarray,
    rho_b: np.ndarray,
    x_grid: np.ndarray,
    tol: Optional[float] = None,
) -> float:
    """Max over time nodes of the label-summed exact BL distance.

    With ``tol`` given, nodes whose cheap upper bound cannot affect the
    comparison against ``tol`` are certified without solving their LPs; the
    returned value is exact whenever it exceeds ``tol``.
    """
    dx = float(x_grid[1] - x_grid[0])
    c = (rho_a - rho_b) * dx
    ubs = _node_upper_bounds(c, dx)
    if tol is None:
        candidates = np.arange(ubs.size)
    else:
        candidates = np.flatnonzero(ubs > tol)
        if candidates.size == 0:
            k = int(np.argmax(ubs))
            return _node_exact_distance(c[k], x_grid)
    best = 0.0
    order = candidates[np.argsort(-ubs[candidates])]
    for k in order:
        if ubs[k] <= best:
            break
        best = max(best, _node_exact_distance(c[k], x_grid))
    return best


# ---------------------------------------------------------------------------
# Picard fixed point
# ---------------------------------------------------------------------------


def solve_fixed_point(
    model: ModelSpec,
    K: int,
    L: int,
    J: int,
    theta: float = 0.5,
    max_iter: int = 60,
    tol: float = 1e-3,
    T: float = 1.0,
) -> EquilibriumField:
    """Damped Picard iteration on the label-state measure flow.

    ``mu_{k+1} = (1-theta) mu_k + theta * forward(backward(mu_k))`` starting
    from the uncontrolled flow (midpoint action everywhere); stops when the
    max over time nodes of the grid-BL distance between successive flows is
    at most ``tol``.  Hitting ``max_iter`` returns the best iterate flagged
    non-converged.  When the kernel fails the PSD diagnostic, uniqueness is
    not guaranteed and the reported iterate is just the one reached.
    """
    if not 0 < theta <= 1:
        raise ValueError("damping theta must lie in (0, 1]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    times = np.linspace(0.0, T, K + 1)
    grid = LabelGrid(L)
    x_grid = np.linspace(model.x_min, model.x_max, J)
    dx = float(x_grid[1] - x_grid[0])

    diag = FixedPointDiagnostics()
    diag.monotonicity_psd = psd_check(model.kernel, grid)[0]

    mid_field = np.full((K + 1, L, J), model.midpoint_action)
    rho, fp_sub = _fp_sweep(model, times, x_grid, grid, mid_field)
    diag.fp_max_substeps = max(diag.fp_max_substeps, fp_sub)

    v = alpha = None
    for it in range(1, max_iter + 1):
        coupling = _coupling_from_rho(model.kernel, grid, x_grid, rho)
        v, alpha, hjb_sub = _hjb_sweep(model, times, x_grid, coupling)
        diag.hjb_max_substeps = max(diag.hjb_max_substeps, hjb_sub)
        rho_new, fp_sub = _fp_sweep(model, times, x_grid, grid, alpha)
        diag.fp_max_substeps = max(diag.fp_max_substeps, fp_sub)
        rho_next = (1.0 - theta) * rho + theta * rho_new
        gap = flow_distance(rho_next, rho, x_grid, tol=tol)
        diag.gap_history.append(gap)
        rho = rho_next
        diag.iterations = it
        if gap <= tol:
            diag.converged = True
            break

    # final consistent backward pass against the accepted flow
    coupling = _coupling_from_rho(model.kernel, grid, x_grid, rho)
    v, alpha, _ = _hjb_sweep(model, times, x_grid, coupling)
    diag.boundary_mass = float((rho[:, :, 0].sum(axis=1) + rho[:, :, -1].sum(axis=1)).max() * dx)
    return EquilibriumField(
        times=times, grid=grid, x_grid=x_grid, v=v, alpha=alpha, rho=rho, diagnostics=diag
    )


def product_structure_check(field: EquilibriumField, bins: Optional[int] = None) -> dict:
    """Spread of terminal per-label-bin state distributions.

    For constant-degree kernels with product-form initial law the
    equilibrium flow is a product measure and the spread (max pairwise BL
    between normalized bin conditionals at the final time) is small; a large
    spread certifies genuine label dependence.
    """
    from .measures import bl_distance

    L = field.grid.ncells
    nbins = bins if bins is not None else L
    if L % nbins != 0:
        raise ValueError("bins must divide the label-cell count")
    per = L // nbins
    k_final = field.times.size - 1
    dists = []
    conds = []
    for b in range(nbins):
        w = field.rho[k_final, b * per : (b + 1) * per].sum(axis=0) * field.dx
        total = w.sum()
        conds.append(ParticleMeasure(field.x_grid, w / total if total > 0 else w))
    spread = 0.0
    for i in range(nbins):
        for j in range(i + 1, nbins):
            spread = max(spread, bl_distance(conds[i], conds[j]))
    return {"bins": nbins, "spread": spread}


# ---------------------------------------------------------------------------
# Model registry
# ---------------------------------------------------------------------------


def make_model(
    name: str,
    kernel: Kernel,
    initial: InitialLaw,
    sigma: float = 0.3,
    a_min: float = -5.0,
    a_max: float = 5.0,
    n_actions: int = 201,
    x_min: float = -4.0,
    x_max: float = 6.0,
    **params,
) -> ModelSpec:
    """Built-in models: ``lq_truncated``, ``crowd_aversion``, ``decoupled_test``."""
    common = dict(
        sigma=sigma,
        a_min=a_min,
        a_max=a_max,
        n_actions=n_actions,
        x_min=x_min,
        x_max=x_max,
        kernel=kernel,
        initial=initial,
    )
    if name == "lq_truncated":
        c = params.pop("c", 1.0)
        return ModelSpec(
            name=name,
            b=lambda t, x, a: a,
            f=lambda t, x, m, a: -0.5 * a**2,
            g=lambda x, m: -0.5 * c * (x - m.mean()) ** 2,
            f_uses_measure=False,
            g_uses_measure=True,
            **common,
        )
    if name == "crowd_aversion":
        gamma = params.pop("gamma", 0.5)
        width = params.pop("width", 0.5)
        c = params.pop("c", 1.0)
        return ModelSpec(
            name=name,
            b=lambda t, x, a: a,
            f=lambda t, x, m, a: -0.5 * a**2
            - gamma * m.mass() * np.exp(-((x - m.mean()) ** 2) / (2.0 * width**2)),
            g=lambda x, m: -0.5 * c * (x - m.mean()) ** 2,
            f_uses_measure=True,
            g_uses_measure=True,
            **common,
        )
    if name == "decoupled_test":
        z0 = params.pop("z0", 0.5)
        c = params.pop("c", 1.0)
        return ModelSpec(
            name=name,
            b=lambda t, x, a: a,
            f=lambda t, x, m, a: -0.5 * a**2,
            g=lambda x, m: -0.5 * c * (x - z0) ** 2,
            f_uses_measure=False,
            g_uses_measure=False,
            **common,
        )
    raise ValueError(f"unknown model {name!r}")
