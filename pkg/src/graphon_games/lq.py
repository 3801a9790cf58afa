"""Closed-form linear-quadratic flocking game on a kernel.

A player with label u controls dX = alpha dt + sigma dB and pays
``(1/2) E[ int alpha^2 dt + c |X_T - target(u)|^2 ]`` where the target is the
raw first moment of the neighborhood measure at the terminal time.  The
equilibrium is explicit: the tracking gain is ``phi(t) = c / (c(T-t)+1)``,
the value offset ``(sigma^2/2) log(c(T-t)+1)``, and the per-label target
solves a resolvent equation

    M = (cT+1)^{-1} K (I - a K)^{-1} psi,     a = cT/(cT+1),

where K is the kernel operator discretized on the label grid (midpoint
collocation with cell weight 1/L, exact for step kernels on aligned grids)
and ``psi(u) = E[X_0 | U = u]``.  Solvability requires the grid L2 norm of
the kernel to stay below ``1 + 1/(cT)``; at the boundary there is no
equilibrium unless psi vanishes, in which case M = 0.

The target function is a weighted Katz centrality: with independent initial
conditions, ``M = E[X_0]/(cT) * katz_centrality(W, cT/(cT+1))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .initial import InitialLaw
from .kernels import Kernel, LabelGrid, grid_matrix, l2_norm
from .seeds import derive_rng

__all__ = [
    "LQParams",
    "LQSolution",
    "LQSolvabilityError",
    "solve_lq",
    "equilibrium_control",
    "katz_centrality",
    "KatzRadiusError",
    "verify_mckean_vlasov",
    "McKeanVlasovReport",
    "terminal_label_state_measure",
]


class LQSolvabilityError(ValueError):
    """Kernel too strong for the resolvent to exist.

    Carries the grid L2 norm of the kernel and the bound ``1 + 1/(cT)`` it
    must stay below.
    """

    def __init__(self, w_l2: float, bound: float, grid_cells: int):
        self.w_l2 = w_l2
        self.bound = bound
        self.grid_cells = grid_cells
        super().__init__(
            f"no equilibrium: ||W||_L2 = {w_l2:.6g} must be < 1 + 1/(cT) = {bound:.6g} "
            f"(grid L2 norm at L = {grid_cells} cells) and the initial means do not vanish"
        )


@dataclass(frozen=True)
class LQParams:
    """Terminal tracking weight c > 0, horizon T > 0, diffusion sigma >= 0."""

    c: float
    T: float
    sigma: float
    kernel: Kernel
    initial: InitialLaw

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("tracking weight c must be positive")
        if self.T <= 0:
            raise ValueError("horizon T must be positive")
        if self.sigma < 0:
            raise ValueError("diffusion sigma must be nonnegative")


@dataclass(frozen=True)
class LQSolution:
    """Equilibrium target table and closed-form coefficient functions."""

    grid: LabelGrid
    M: np.ndarray
    c: float
    T: float
    sigma: float
    katz_parameter: float
    w_l2_grid: float
    solvability_margin: float
    psi_table: np.ndarray = field(repr=False)

    def phi(self, t):
        """Tracking gain c/(c(T-t)+1); increases from c/(cT+1) to c."""
        t = np.asarray(t, dtype=float)
        return self.c / (self.c * (self.T - t) + 1.0)

    def psi_val(self, t):
        """Value offset (sigma^2/2) log(c(T-t)+1); vanishes at T."""
        t = np.asarray(t, dtype=float)
        return 0.5 * self.sigma**2 * np.log(self.c * (self.T - t) + 1.0)

    def M_at(self, u):
        """Target read by nearest-cell lookup."""
        return self.M[self.grid.cell_of(u)]

    def control(self, t, u, x):
        """Equilibrium control phi(t) (M(u) - x)."""
        return self.phi(t) * (self.M_at(u) - np.asarray(x, dtype=float))


def solve_lq(params: LQParams, L: int) -> LQSolution:
    """Solve the fixed point on an L-cell label grid by direct dense solve.

    Raises :class:`LQSolvabilityError` when the grid L2 norm violates the
    existence bound, unless psi vanishes identically (then M = 0 is returned).
    """
    grid = LabelGrid(L)
    K = grid_matrix(params.kernel, grid) * grid.weight
    w_l2 = float(np.sqrt(np.mean(grid_matrix(params.kernel, grid) ** 2)))
    cT = params.c * params.T
    bound = 1.0 + 1.0 / cT
    margin = bound - w_l2
    a = cT / (cT + 1.0)
    psi = params.initial.psi(grid)

    if margin <= 0:
        if np.all(psi == 0.0):
            M = np.zeros(L)
        else:
            raise LQSolvabilityError(w_l2, bound, L)
    else:
        y = np.linalg.solve(np.eye(L) - a * K, psi)
        M = (K @ y) / (cT + 1.0)

    return LQSolution(
        grid=grid,
        M=M,
        c=params.c,
        T=params.T,
        sigma=params.sigma,
        katz_parameter=a,
        w_l2_grid=w_l2,
        solvability_margin=margin,
        psi_table=psi,
    )


def equilibrium_control(sol: LQSolution, t, u, x):
    """phi(t) (M(u) - x) with M read by nearest-cell lookup."""
    return sol.control(t, u, x)


def terminal_label_state_measure(
    sol: LQSolution,
    params: LQParams,
    x_cells: int = 64,
    width_sds: float = 4.0,
):
    """Discretized terminal law of (U, X_T) under the equilibrium dynamics.

    Given U = u the terminal state is Gaussian with mean
    ``psi(u)/(cT+1) + M(u) cT/(cT+1)`` and variance ``sigma^2 T/(cT+1)``
    (integrate the tracking SDE against the gain phi).  Per label cell the
    Gaussian is binned onto a shared state grid, which keeps downstream
    bounded-Lipschitz computations on a small common support.
    """
    from scipy.stats import norm

    from .measures import LabelStateMeasure

    cT = params.c * params.T
    means = sol.psi_table / (cT + 1.0) + sol.M * cT / (cT + 1.0)
    var = params.sigma**2 * params.T / (cT + 1.0)
    sd = np.sqrt(var)
    lo = means.min() - width_sds * sd
    hi = means.max() + width_sds * sd
    if sd == 0:
        lo, hi = means.min() - 1.0, means.max() + 1.0
    x_grid = np.linspace(lo, hi, x_cells)
    dx = x_grid[1] - x_grid[0]
    edges = np.concatenate([[x_grid[0] - dx / 2], x_grid + dx / 2])
    L = sol.grid.ncells
    u_atoms, x_atoms, w_atoms = [], [], []
    for l in range(L):
        if sd > 0:
            mass = np.diff(norm.cdf(edges, loc=means[l], scale=sd))
            mass = mass / mass.sum()
        else:
            mass = np.zeros(x_cells)
            mass[np.argmin(np.abs(x_grid - means[l]))] = 1.0
        u_atoms.append(np.full(x_cells, sol.grid.midpoints[l]))
        x_atoms.append(x_grid)
        w_atoms.append(mass / L)
    return LabelStateMeasure(
        np.concatenate(u_atoms), np.concatenate(x_atoms), np.concatenate(w_atoms)
    )


class KatzRadiusError(ValueError):
    """alpha K has spectral radius >= 1; the walk series diverges."""

    def __init__(self, radius: float):
        self.radius = radius
        super().__init__(f"katz centrality undefined: spectral radius of alpha*K is {radius:.6g} >= 1")


def katz_centrality(kernel: Kernel, alpha: float, L: int) -> np.ndarray:
    """Kernel Katz centrality ``[(I - alpha K)^{-1} - I] 1`` on the label grid."""
    grid = LabelGrid(L)
    K = grid_matrix(kernel, grid) * grid.weight
    radius = float(np.max(np.abs(np.linalg.eigvals(alpha * K))))
    if radius >= 1.0 - 1e-10:
        raise KatzRadiusError(radius)
    ones = np.ones(L)
    return np.linalg.solve(np.eye(L) - alpha * K, ones) - ones


@dataclass(frozen=True)
class McKeanVlasovReport:
    """Monte-Carlo self-consistency residuals of an LQ solution.

    ``estimate[l]`` approximates E[W(u_l, U) X_T] under the closed-form
    dynamics; in equilibrium it must match ``target[l] = M(u_l)`` up to Monte
    Carlo error and the label-grid resolution.
    """

    probe_labels: np.ndarray
    target: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    paths: int
    dt: float

    @property
    def residual(self) -> np.ndarray:
        return self.estimate - self.target

    def max_normalized_residual(self, slack: float = 0.0) -> float:
        """max_l |residual_l| / (3 stderr_l + slack)."""
        return float(np.max(np.abs(self.residual) / (3.0 * self.stderr + slack)))


def verify_mckean_vlasov(
    sol: LQSolution,
    params: LQParams,
    paths: int,
    dt: float,
    seed: int,
    n_probes: int = 16,
) -> McKeanVlasovReport:
    """Simulate the equilibrium state equation and test self-consistency.

    Euler-Maruyama on ``dX = phi(t)(M(U) - X) dt + sigma dB`` with
    ``(U, X_0) ~ lambda``; per probe label the report compares the Monte
    Carlo estimate of E[W(u_l, U) X_T] against M(u_l).  Path accumulation is
    a single fixed-order vectorized reduction, so reruns with the same seed
    reproduce the estimates bitwise.
    """
    if paths <= 0 or dt <= 0:
        raise ValueError("paths and dt must be positive")
    rng = derive_rng(seed, "lq.verify_mckean_vlasov")
    steps = max(1, int(round(params.T / dt)))
    h = params.T / steps

    u = rng.uniform(size=paths)
    x = params.initial.sample(u, rng)
    target = sol.M_at(u)
    sqrt_h = np.sqrt(h)
    for k in range(steps):
        t = k * h
        drift = sol.phi(t) * (target - x)
        x = x + drift * h
        if params.sigma > 0:
            x = x + params.sigma * sqrt_h * rng.standard_normal(paths)

    L = sol.grid.ncells
    stride = max(1, L // n_probes)
    probe_idx = np.arange(0, L, stride)[:n_probes]
    probes = sol.grid.midpoints[probe_idx]
    samples = params.kernel(probes[:, None], u[None, :]) * x[None, :]
    estimate = samples.mean(axis=1)
    stderr = samples.std(axis=1, ddof=1) / np.sqrt(paths)
    return McKeanVlasovReport(
        probe_labels=probes,
        target=sol.M[probe_idx],
        estimate=estimate,
        stderr=stderr,
        paths=paths,
        dt=h,
    )
