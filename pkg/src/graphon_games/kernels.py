"""Nonnegative interaction kernels W on [0,1]^2 and their operators.

A kernel here is either a step kernel backed by an n x n matrix (constant on
the blocks ``I_i x I_j`` with ``I_i = [(i-1)/n, i/n)``, last interval closed)
or an analytic rule (constant, two-block, min, tabulated grid).  Kernels are
not required to be symmetric or bounded by 1; unbounded entries arise from
normalized sparse-graph constructions.

Besides pointwise evaluation the module provides degree functions, L1/L2
norms, the cut norm and the infinity-to-one operator norm of step kernels
(exact for small n, alternating-maximization lower bounds otherwise), the
action of the kernel operator on tabulated functions and on label-state
measures, and a discretized positive-semidefiniteness diagnostic.

Everything is immutable after construction and all operations are pure, so
concurrent use is safe; heuristic searches take explicit seeds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .measures import LabelStateMeasure, ParticleMeasure

__all__ = [
    "Kernel",
    "LabelGrid",
    "step_kernel",
    "constant_kernel",
    "two_block_kernel",
    "min_kernel",
    "tabulated_kernel",
    "bilinear_kernel",
    "degree",
    "is_constant_degree",
    "l1_norm",
    "l2_norm",
    "cut_norm_step",
    "opnorm_inf_to_1",
    "NormResult",
    "grid_matrix",
    "apply_to_function",
    "apply_to_measure",
    "psd_check",
]

DEFAULT_QUADRATURE_NODES = 1024


@dataclass(frozen=True)
class LabelGrid:
    """Uniform discretization of the label space [0,1].

    L cells with midpoints u_l = (l - 1/2)/L and weight 1/L each.  When L is
    a multiple of a step kernel's block count, cell midpoints never straddle
    block boundaries and kernel operations on the grid are exact.
    """

    ncells: int

    def __post_init__(self):
        if self.ncells < 1:
            raise ValueError("label grid needs at least one cell")

    @property
    def midpoints(self) -> np.ndarray:
        L = self.ncells
        return (np.arange(L) + 0.5) / L

    @property
    def weight(self) -> float:
        return 1.0 / self.ncells

    def cell_of(self, u) -> np.ndarray:
        """Index of the cell containing each label (final edge maps inward)."""
        idx = np.floor(np.asarray(u, dtype=float) * self.ncells).astype(int)
        return np.clip(idx, 0, self.ncells - 1)


@dataclass(frozen=True)
class Kernel:
    """A nonnegative kernel on [0,1]^2.

    ``kind`` is one of ``step``, ``constant``, ``two_block``, ``min``,
    ``tabulated``; ``matrix`` backs the step/tabulated variants and
    ``params`` the named analytic rules.  ``sup_bound`` is an upper bound on
    the kernel values when one is known (required by simple-graph sampling).
    """

    kind: str
    matrix: Optional[np.ndarray] = None
    params: tuple = ()
    sup_bound: Optional[float] = None

    @property
    def block_count(self) -> Optional[int]:
        if self.kind in ("step", "tabulated"):
            return self.matrix.shape[0]
        if self.kind == "two_block":
            return 2
        if self.kind == "constant":
            return 1
        return None

    @property
    def is_step(self) -> bool:
        return self.block_count is not None

    def __call__(self, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.kind == "constant":
            (p,) = self.params
            return np.broadcast_to(np.float64(p), np.broadcast_shapes(u.shape, v.shape)).copy()
        if self.kind == "min":
            return np.minimum(u, v)
        if self.kind == "two_block":
            w11, w12, w21, w22 = self.params
            top = np.where(v < 0.5, w11, w12)
            bot = np.where(v < 0.5, w21, w22)
            return np.where(u < 0.5, top, bot)
        if self.kind in ("step", "tabulated"):
            n = self.matrix.shape[0]
            iu = np.clip(np.floor(u * n).astype(int), 0, n - 1)
            iv = np.clip(np.floor(v * n).astype(int), 0, n - 1)
            return self.matrix[iu, iv]
        if self.kind == "bilinear":
            g = self.matrix
            m = g.shape[0] - 1
            su, sv = u * m, v * m
            iu = np.clip(np.floor(su).astype(int), 0, m - 1)
            iv = np.clip(np.floor(sv).astype(int), 0, m - 1)
            fu, fv = su - iu, sv - iv
            return (
                g[iu, iv] * (1 - fu) * (1 - fv)
                + g[iu, iv + 1] * (1 - fu) * fv
                + g[iu + 1, iv] * fu * (1 - fv)
                + g[iu + 1, iv + 1] * fu * fv
            )
        raise ValueError(f"unknown kernel kind {self.kind!r}")


def step_kernel(matrix) -> Kernel:
    """Step kernel of an n x n nonnegative matrix (entries may exceed 1)."""
    m = np.array(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("step kernel requires a square matrix")
    if m.size and m.min() < 0:
        raise ValueError("step kernel entries must be nonnegative")
    m.setflags(write=False)
    return Kernel(kind="step", matrix=m, sup_bound=float(m.max()) if m.size else 0.0)


def constant_kernel(p: float) -> Kernel:
    if p < 0:
        raise ValueError("constant kernel level must be nonnegative")
    return Kernel(kind="constant", params=(float(p),), sup_bound=float(p))


def two_block_kernel(w11: float, w12: float, w21: float, w22: float) -> Kernel:
    vals = (float(w11), float(w12), float(w21), float(w22))
    if min(vals) < 0:
        raise ValueError("two-block kernel values must be nonnegative")
    return Kernel(kind="two_block", params=vals, sup_bound=max(vals))


def min_kernel() -> Kernel:
    """W(u, v) = min(u, v), the Brownian covariance kernel."""
    return Kernel(kind="min", sup_bound=1.0)


def tabulated_kernel(values) -> Kernel:
    """User-supplied grid of values, interpreted as a uniform step kernel."""
    k = step_kernel(values)
    return Kernel(kind="tabulated", matrix=k.matrix, sup_bound=k.sup_bound)


def bilinear_kernel(corner_values) -> Kernel:
    """Continuous kernel interpolating values given at uniform grid nodes.

    An (m+1) x (m+1) node matrix yields the piecewise-bilinear interpolant on
    [0,1]^2; extrema sit at the nodes, so the sup bound is exact.
    """
    g = np.array(corner_values, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 2:
        raise ValueError("bilinear kernel requires a square node matrix of size >= 2")
    if g.min() < 0:
        raise ValueError("bilinear kernel values must be nonnegative")
    g.setflags(write=False)
    return Kernel(kind="bilinear", matrix=g, sup_bound=float(g.max()))


def grid_matrix(kernel: Kernel, grid: LabelGrid) -> np.ndarray:
    """Pointwise evaluations W(u_l, u_k) on the label-grid midpoints."""
    u = grid.midpoints
    return kernel(u[:, None], u[None, :])


# ---------------------------------------------------------------------------
# Degrees and norms
# ---------------------------------------------------------------------------


def degree(kernel: Kernel, u, resolution: int = DEFAULT_QUADRATURE_NODES) -> np.ndarray:
    """Out-degree function ``int_0^1 W(u, v) dv``.

    Exact block sums for step kernels; composite midpoint quadrature with
    ``resolution`` nodes otherwise (higher-order rules gain nothing because
    kernels may be discontinuous).
    """
    u = np.asarray(u, dtype=float)
    if kernel.kind in ("step", "tabulated"):
        n = kernel.matrix.shape[0]
        iu = np.clip(np.floor(u * n).astype(int), 0, n - 1)
        row_means = kernel.matrix.mean(axis=1)
        return row_means[iu]
    if kernel.kind == "constant":
        (p,) = kernel.params
        return np.broadcast_to(np.float64(p), u.shape).copy()
    if kernel.kind == "two_block":
        w11, w12, w21, w22 = kernel.params
        return np.where(u < 0.5, 0.5 * (w11 + w12), 0.5 * (w21 + w22))
    nodes = (np.arange(resolution) + 0.5) / resolution
    return kernel(u[..., None], nodes).mean(axis=-1)


def is_constant_degree(kernel: Kernel, tol: float, grid: Optional[LabelGrid] = None) -> bool:
    """True iff the grid degree function stays within ``tol`` of 1."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if grid is None:
        blocks = kernel.block_count
        grid = LabelGrid(blocks if blocks is not None else 256)
    d = degree(kernel, grid.midpoints)
    return bool(np.max(np.abs(d - 1.0)) <= tol)


def l1_norm(kernel: Kernel, resolution: int = DEFAULT_QUADRATURE_NODES) -> float:
    """``int int |W| du dv``; exact for step kernels."""
    if kernel.is_step and kernel.kind in ("step", "tabulated"):
        return float(np.abs(kernel.matrix).mean())
    if kernel.kind == "constant":
        return kernel.params[0]
    if kernel.kind == "two_block":
        return 0.25 * sum(abs(v) for v in kernel.params)
    nodes = (np.arange(resolution) + 0.5) / resolution
    return float(np.abs(kernel(nodes[:, None], nodes[None, :])).mean())


def l2_norm(kernel: Kernel, resolution: int = DEFAULT_QUADRATURE_NODES) -> float:
    """``(int int W^2)^{1/2}``; exact for step kernels."""
    if kernel.is_step and kernel.kind in ("step", "tabulated"):
        return float(np.sqrt((kernel.matrix**2).mean()))
    if kernel.kind == "constant":
        return kernel.params[0]
    if kernel.kind == "two_block":
        return float(np.sqrt(0.25 * sum(v**2 for v in kernel.params)))
    nodes = (np.arange(resolution) + 0.5) / resolution
    return float(np.sqrt((kernel(nodes[:, None], nodes[None, :]) ** 2).mean()))


# ---------------------------------------------------------------------------
# Cut norm and infinity-to-one operator norm of step kernels
# ---------------------------------------------------------------------------

EXACT_MODE_MAX_N = 20


@dataclass(frozen=True)
class NormResult:
    """A computed norm together with its certificate.

    ``value`` is exact in ``exact`` mode and a certified lower bound in
    ``heuristic`` mode.  The certificate holds the index sets (cut norm) or
    sign vectors (operator norm) attaining ``value``.
    """

    name: str
    value: float
    mode: str
    certificate: tuple

    def as_record(self) -> dict:
        cert = tuple(np.asarray(c).tolist() for c in self.certificate)
        return {"name": self.name, "value": self.value, "mode": self.mode, "certificate": cert}


def _best_indicator(y: np.ndarray, sign: int) -> np.ndarray:
    # optimal 0/1 vector for sign * s.y
    return (sign * y > 0).astype(float)


def _cut_value(xi: np.ndarray, s: np.ndarray, t: np.ndarray) -> float:
    n = xi.shape[0]
    return float(s @ xi @ t) / (n * n)


def _cut_norm_exact(xi: np.ndarray):
    n = xi.shape[0]
    best = 0.0
    best_cert = (np.zeros(n), np.zeros(n))
    t = np.zeros(n)
    y = np.zeros(n)  # xi @ t, updated by Gray-code bit flips
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        if t[j] == 0.0:
            t[j] = 1.0
            y += xi[:, j]
        else:
            t[j] = 0.0
            y -= xi[:, j]
        pos = float(np.maximum(y, 0.0).sum()) / (n * n)
        neg = float(-np.minimum(y, 0.0).sum()) / (n * n)
        if pos > best:
            best = pos
            best_cert = (_best_indicator(y, 1), t.copy())
        if neg > best:
            best = neg
            best_cert = (_best_indicator(y, -1), t.copy())
    return best, best_cert


def _alternating_max(xi: np.ndarray, t0: np.ndarray, max_rounds: int = 200):
    """Local maximum of s'.xi.t / n^2 over 0/1 vectors from start t0."""
    n = xi.shape[0]
    t = t0.astype(float)
    value = -np.inf
    s = np.zeros(n)
    for _ in range(max_rounds):
        s = _best_indicator(xi @ t, 1)
        t_new = _best_indicator(xi.T @ s, 1)
        new_value = _cut_value(xi, s, t_new)
        if new_value <= value + 1e-15:
            t = t_new
            break
        value, t = new_value, t_new
    return max(_cut_value(xi, s, t), 0.0), s, t


def _cut_norm_heuristic(xi: np.ndarray, restarts: int, seed):
    n = xi.shape[0]
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, 2, size=(max(restarts, 1), n))
    best = 0.0
    best_cert = (np.zeros(n), np.zeros(n))
    for t0 in starts:
        for mat in (xi, -xi):  # positive and negative branches of |.|
            value, s, t = _alternating_max(mat, t0)
            if value > best:
                best = value
                best_cert = (s, t)
    return best, best_cert


def cut_norm_step(
    xi,
    mode: str = "exact",
    restarts: int = 64,
    seed: Optional[int] = None,
) -> NormResult:
    """Cut norm of the step kernel of ``xi`` with certificate sets.

    For step kernels the supremum over Borel sets is attained on block-aligned
    sets, reducing to ``max |1_S1' xi 1_S2| / n^2`` over index subsets.  Exact
    mode enumerates one side (cost 2^n * n, n <= 20); heuristic mode returns
    the best local maximum of alternating maximization over ``restarts``
    random starts, a certified lower bound.
    """
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[0]
    if xi.shape != (n, n):
        raise ValueError("interaction matrix must be square")
    if mode == "exact":
        if n > EXACT_MODE_MAX_N:
            raise ValueError(f"exact cut norm limited to n <= {EXACT_MODE_MAX_N}, got n = {n}")
        value, (s, t) = _cut_norm_exact(xi)
    elif mode == "heuristic":
        if seed is None:
            raise ValueError("heuristic mode requires an explicit seed")
        value, (s, t) = _cut_norm_heuristic(xi, restarts, seed)
    else:
        raise ValueError("mode must be 'exact' or 'heuristic'")
    s1 = tuple(np.flatnonzero(s).tolist())
    s2 = tuple(np.flatnonzero(t).tolist())
    return NormResult(name="cut_norm", value=value, mode=mode, certificate=(s1, s2))


def _opnorm_exact(xi: np.ndarray):
    n = xi.shape[0]
    t = np.full(n, -1.0)
    y = xi @ t
    best = float(np.abs(y).sum()) / (n * n)
    best_t = t.copy()
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        t[j] = -t[j]
        y += 2.0 * t[j] * xi[:, j]
        value = float(np.abs(y).sum()) / (n * n)
        if value > best:
            best = value
            best_t = t.copy()
    s = np.sign(xi @ best_t)
    s[s == 0] = 1.0
    return best, (s, best_t)


def _opnorm_heuristic(xi: np.ndarray, restarts: int, seed):
    n = xi.shape[0]
    rng = np.random.default_rng(seed)
    starts = rng.choice([-1.0, 1.0], size=(max(restarts, 1), n))
    best = -np.inf
    best_cert = None
    for t0 in starts:
        t = t0.copy()
        value = -np.inf
        s = t0.copy()
        for _ in range(200):
            s = np.sign(xi @ t)
            s[s == 0] = 1.0
            t_new = np.sign(xi.T @ s)
            t_new[t_new == 0] = 1.0
            new_value = _cut_value(xi, s, t_new)
            if new_value <= value + 1e-15:
                t = t_new
                break
            value, t = new_value, t_new
        value = _cut_value(xi, s, t)
        if value > best:
            best = value
            best_cert = (s, t)
    return best, best_cert


def opnorm_inf_to_1(
    xi,
    mode: str = "exact",
    restarts: int = 64,
    seed: Optional[int] = None,
) -> NormResult:
    """Infinity-to-one operator norm of the step kernel of ``xi``.

    Equals ``max s' xi t / n^2`` over sign vectors s, t; computed by
    exhausting t with the exact inner maximization over s (signs of xi t).
    Sandwiched between the cut norm and four times the cut norm.
    """
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[0]
    if xi.shape != (n, n):
        raise ValueError("interaction matrix must be square")
    if mode == "exact":
        if n > EXACT_MODE_MAX_N:
            raise ValueError(f"exact operator norm limited to n <= {EXACT_MODE_MAX_N}, got n = {n}")
        value, (s, t) = _opnorm_exact(xi)
    elif mode == "heuristic":
        if seed is None:
            raise ValueError("heuristic mode requires an explicit seed")
        value, (s, t) = _opnorm_heuristic(xi, restarts, seed)
    else:
        raise ValueError("mode must be 'exact' or 'heuristic'")
    return NormResult(
        name="opnorm_inf_to_1",
        value=value,
        mode=mode,
        certificate=(tuple(s.tolist()), tuple(t.tolist())),
    )


# ---------------------------------------------------------------------------
# Kernel operators
# ---------------------------------------------------------------------------


def apply_to_function(kernel: Kernel, phi, grid: LabelGrid) -> np.ndarray:
    """Kernel operator on a tabulated function: ``(W phi)(u_l) = sum_k W(u_l,u_k) phi(u_k)/L``.

    Exact when the grid aligns with a step kernel's blocks; midpoint
    quadrature otherwise.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (grid.ncells,):
        raise ValueError("phi must be tabulated on the label grid")
    if not np.all(np.isfinite(phi)):
        raise ValueError("phi must be finite on the grid")
    return grid_matrix(kernel, grid) @ phi * grid.weight


def apply_to_measure(kernel: Kernel, m: LabelStateMeasure, u: float) -> ParticleMeasure:
    """Neighborhood measure ``W m(u) = sum_j w_j W(u, v_j) delta_{x_j}``.

    Zero-mass atoms are dropped; with W constant equal to 1 the result is the
    second marginal of ``m``.
    """
    if m.natoms == 0:
        return ParticleMeasure.zero()
    weights = m.w * kernel(np.float64(u), m.u)
    return ParticleMeasure(m.x, weights)


def psd_check(kernel: Kernel, grid: LabelGrid, tol: float = 1e-9):
    """Discretized positive-semidefiniteness diagnostic.

    Forms ``K_lk = W(u_l, u_k)/L`` and returns ``(flag, lambda_min)`` where
    ``lambda_min`` is the smallest eigenvalue of the symmetric part.  Only the
    symmetric part enters because the quadratic form ignores the rest; a True
    flag is evidence for the monotonicity sufficient condition, not a proof.
    """
    K = grid_matrix(kernel, grid) * grid.weight
    sym = 0.5 * (K + K.T)
    eigmin = float(np.linalg.eigvalsh(sym)[0])
    return eigmin >= -tol, eigmin
