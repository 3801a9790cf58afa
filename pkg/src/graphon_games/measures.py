"""Finitely supported measures on R and on [0,1] x R.

Covers the nonnegative weighted particle measures the games are phrased in:
neighborhood empirical measures ``(1/n) sum_j xi_ij delta_{x_j}``, label-state
measures with uniform first marginal, and exact bounded-Lipschitz distances in
one dimension.

The BL norm of a signed measure ``mu`` is

    ||mu||_BL = sup { integral(phi d mu) : |phi| <= 1, Lip(phi) <= 1 }.

For finitely supported measures on R this supremum is a finite linear program
over the test-function values at the merged support points: between support
points any admissible extension exists iff the adjacent increments satisfy the
Lipschitz bound, and clipping to [-1, 1] preserves the Lipschitz constant, so
adjacent constraints are sufficient.  The LP is solved exactly (dual simplex).
State dimension d = 1 is the only dimension with this exact path; signatures
keep scalar states throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

__all__ = [
    "ParticleMeasure",
    "LabelStateMeasure",
    "MeasureFlow",
    "neighborhood_measure",
    "bl_distance",
    "bl_distance_dense_oracle",
    "bl_upper_bound",
]


def _canonical_atoms(x, w):
    """Sort by position, merge exactly-equal positions, drop zero masses."""
    x = np.asarray(x, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if x.shape != w.shape:
        raise ValueError("positions and masses must have equal length")
    if w.size and w.min() < 0:
        raise ValueError("particle masses must be nonnegative")
    if x.size == 0:
        return x, w
    xs, inverse = np.unique(x, return_inverse=True)
    ws = np.zeros_like(xs)
    np.add.at(ws, inverse, w)
    keep = ws > 0
    return xs[keep], ws[keep]


@dataclass(frozen=True)
class ParticleMeasure:
    """Nonnegative measure on R with finite support.

    Atoms are kept in canonical form: sorted positions, exact duplicates
    merged, zero masses dropped.  Total mass need not be 1; the zero measure
    is legal (empty neighborhoods occur for isolated rows).
    """

    x: np.ndarray
    w: np.ndarray

    def __init__(self, x=(), w=()):
        x, w = _canonical_atoms(x, w)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)

    @staticmethod
    def dirac(x0: float, mass: float = 1.0) -> "ParticleMeasure":
        return ParticleMeasure([x0], [mass])

    @staticmethod
    def zero() -> "ParticleMeasure":
        return ParticleMeasure()

    @property
    def natoms(self) -> int:
        return self.x.size

    def mass(self) -> float:
        return float(self.w.sum())

    def mean(self) -> float:
        """Raw first moment ``sum w_j x_j`` (0 for the zero measure).

        The linear-quadratic model reads the raw moment of the neighborhood
        measure, whose total mass is in general not 1.
        """
        return float(self.w @ self.x) if self.natoms else 0.0

    def scaled(self, a: float) -> "ParticleMeasure":
        if a < 0:
            raise ValueError("scale factor must be nonnegative")
        return ParticleMeasure(self.x, a * self.w)

    def __add__(self, other: "ParticleMeasure") -> "ParticleMeasure":
        return ParticleMeasure(
            np.concatenate([self.x, other.x]), np.concatenate([self.w, other.w])
        )

    def normalized(self) -> "ParticleMeasure":
        m = self.mass()
        if m == 0:
            raise ValueError("cannot normalize the zero measure")
        return self.scaled(1.0 / m)


def neighborhood_measure(xi: np.ndarray, states, i: int) -> ParticleMeasure:
    """Neighborhood empirical measure of player ``i`` (0-based).

    ``M_i = (1/n) sum_j xi[i, j] delta_{x_j}``; its mass is the scaled row sum
    of the interaction matrix and is zero for an isolated row.
    """
    xi = np.asarray(xi, dtype=float)
    states = np.asarray(states, dtype=float).ravel()
    n = states.size
    if xi.shape != (n, n):
        raise ValueError("interaction matrix must be n x n for n states")
    if not 0 <= i < n:
        raise ValueError("player index out of range")
    return ParticleMeasure(states, xi[i] / n)


# ---------------------------------------------------------------------------
# Bounded-Lipschitz distance (exact, d = 1)
# ---------------------------------------------------------------------------


def _signed_support(m1: ParticleMeasure, m2: ParticleMeasure):
    """Merged support and signed weight vector of m1 - m2, zero entries dropped."""
    x = np.concatenate([m1.x, m2.x])
    c = np.concatenate([m1.w, -m2.w])
    xs, inverse = np.unique(x, return_inverse=True)
    cs = np.zeros_like(xs)
    np.add.at(cs, inverse, c)
    keep = cs != 0.0
    return xs[keep], cs[keep]


def _chain_lp_matrix(x: np.ndarray):
    k = x.size
    d = np.diff(x)
    idx = np.arange(k - 1)
    data = np.concatenate([np.ones(k - 1), -np.ones(k - 1), -np.ones(k - 1), np.ones(k - 1)])
    rows = np.concatenate([idx, idx, (k - 1) + idx, (k - 1) + idx])
    cols = np.concatenate([idx + 1, idx, idx + 1, idx])
    a_ub = sp.csr_matrix((data, (rows, cols)), shape=(2 * (k - 1), k))
    return a_ub, np.concatenate([d, d])


def _maximize_chain(x: np.ndarray, c: np.ndarray) -> float:
    """max c.phi  s.t. |phi_k| <= 1 and |phi_{k+1}-phi_k| <= x_{k+1}-x_k."""
    k = x.size
    if k == 0:
        return 0.0
    if k == 1:
        return abs(float(c[0]))
    a_ub, b_ub = _chain_lp_matrix(x)
    res = linprog(-c, A_ub=a_ub, b_ub=b_ub, bounds=(-1.0, 1.0), method="highs-ds")
    if not res.success:  # pragma: no cover - tiny LPs do not fail in practice
        raise RuntimeError(f"BL chain LP failed: {res.message}")
    return -float(res.fun)


def bl_distance(m1: ParticleMeasure, m2: ParticleMeasure) -> float:
    """Exact bounded-Lipschitz distance ``||m1 - m2||_BL`` on R."""
    x, c = _signed_support(m1, m2)
    return _maximize_chain(x, c)


def bl_distance_dense_oracle(m1: ParticleMeasure, m2: ParticleMeasure) -> float:
    """Brute-force oracle: LP over all O(k^2) pairwise Lipschitz constraints.

    Independent of the adjacent-constraint path; intended for tests only.
    """
    x, c = _signed_support(m1, m2)
    k = x.size
    if k == 0:
        return 0.0
    if k == 1:
        return abs(float(c[0]))
    ii, jj = np.triu_indices(k, 1)
    npairs = ii.size
    rows = np.repeat(np.arange(2 * npairs), 2)
    cols = np.concatenate([np.stack([ii, jj], axis=1), np.stack([ii, jj], axis=1)]).ravel()
    vals = np.concatenate(
        [np.tile([1.0, -1.0], npairs), np.tile([-1.0, 1.0], npairs)]
    )
    a_ub = sp.csr_matrix((vals, (rows, cols)), shape=(2 * npairs, k))
    b_ub = np.tile(x[jj] - x[ii], 2)
    res = linprog(-c, A_ub=a_ub, b_ub=b_ub, bounds=(-1.0, 1.0), method="highs-ds")
    if not res.success:  # pragma: no cover
        raise RuntimeError(f"BL dense LP failed: {res.message}")
    return -float(res.fun)


def bl_upper_bound(m1: ParticleMeasure, m2: ParticleMeasure) -> float:
    """Cheap upper bound on ``||m1 - m2||_BL`` without solving the LP.

    Uses ``min( sum|c|, |sum c| + sum_j d_j |S_j| )`` where ``S_j`` are the
    tail sums of the signed weights; both follow from |phi| <= 1 and the
    Lipschitz increments.  Used to prune exact evaluations in iteration loops.
    """
    x, c = _signed_support(m1, m2)
    if x.size == 0:
        return 0.0
    mass_bound = float(np.abs(c).sum())
    tails = np.cumsum(c[::-1])[::-1]  # S_j = sum_{k >= j} c_k
    lip_bound = abs(float(c.sum())) + float(np.diff(x) @ np.abs(tails[1:]))
    return min(mass_bound, lip_bound)


# ---------------------------------------------------------------------------
# Label-state measures and flows
# ---------------------------------------------------------------------------


def _canonical_label_atoms(u, x, w):
    u = np.asarray(u, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if not (u.shape == x.shape == w.shape):
        raise ValueError("labels, positions and masses must have equal length")
    if w.size and w.min() < 0:
        raise ValueError("particle masses must be nonnegative")
    if u.size and (u.min() < 0 or u.max() > 1):
        raise ValueError("labels must lie in [0, 1]")
    pairs = np.stack([u, x], axis=1)
    uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
    ws = np.zeros(uniq.shape[0])
    np.add.at(ws, inverse, w)
    keep = ws > 0
    return uniq[keep, 0], uniq[keep, 1], ws[keep]


@dataclass(frozen=True)
class LabelStateMeasure:
    """Finitely supported nonnegative measure on [0,1] x R.

    Empirical constructions carry masses 1/n and are flagged ``normalized``
    when the total mass is 1 (uniform-first-marginal convention up to the
    finite support).
    """

    u: np.ndarray
    x: np.ndarray
    w: np.ndarray

    def __init__(self, u=(), x=(), w=()):
        u, x, w = _canonical_label_atoms(u, x, w)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)

    @staticmethod
    def empirical(labels, states) -> "LabelStateMeasure":
        labels = np.asarray(labels, dtype=float).ravel()
        n = labels.size
        return LabelStateMeasure(labels, states, np.full(n, 1.0 / n))

    @property
    def natoms(self) -> int:
        return self.u.size

    def mass(self) -> float:
        return float(self.w.sum())

    @property
    def normalized(self) -> bool:
        return bool(np.isclose(self.mass(), 1.0, rtol=0.0, atol=1e-12))

    def second_marginal(self) -> ParticleMeasure:
        return ParticleMeasure(self.x, self.w)

    def restrict_labels(self, lo: float, hi: float) -> ParticleMeasure:
        """State-measure of the atoms with label in [lo, hi)."""
        mask = (self.u >= lo) & (self.u < hi)
        return ParticleMeasure(self.x[mask], self.w[mask])

    def conditional_mean_by_bin(self, bins) -> np.ndarray:
        """Mass-weighted state means per label bin; NaN marks an empty bin.

        ``bins`` is the array of bin edges partitioning [0, 1]; atoms on the
        final edge belong to the last bin.
        """
        edges = np.asarray(bins, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise ValueError("bins must be a 1-d array of at least two edges")
        idx = np.clip(np.searchsorted(edges, self.u, side="right") - 1, 0, edges.size - 2)
        nbins = edges.size - 1
        mass = np.zeros(nbins)
        moment = np.zeros(nbins)
        np.add.at(mass, idx, self.w)
        np.add.at(moment, idx, self.w * self.x)
        out = np.full(nbins, np.nan)
        nonempty = mass > 0
        out[nonempty] = moment[nonempty] / mass[nonempty]
        return out


@dataclass
class MeasureFlow:
    """One label-state measure per node of a strictly increasing time grid."""

    times: np.ndarray
    measures: list[LabelStateMeasure]
    nearest_node_warning: bool = field(default=False, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).ravel()
        if self.times.size != len(self.measures):
            raise ValueError("one measure per time node required")
        if self.times.size and np.any(np.diff(self.times) <= 0):
            raise ValueError("time grid must be strictly increasing")

    def marginal_at(self, t: float) -> LabelStateMeasure:
        """Measure at time t; off-grid queries snap to the nearest node.

        Off-grid access sets ``nearest_node_warning`` on the flow rather than
        raising, so callers can surface the approximation.
        """
        k = int(np.argmin(np.abs(self.times - t)))
        if self.times[k] != t:
            self.nearest_node_warning = True
        return self.measures[k]
