"""Initial label-state laws with uniform label marginal.

The joint law of (U, X_0) enters every game in one of three shapes: X_0 a
deterministic function of the label, X_0 independent of the label with a
named one-dimensional law, or per-label-cell particle lists.  This module
gives each shape a sampler, the conditional-mean table psi(u) = E[X_0 | U=u],
and a per-cell density histogram for PDE initialization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .kernels import LabelGrid
from .measures import ParticleMeasure

__all__ = ["InitialLaw", "deterministic_map", "independent_law", "per_cell_particles"]


@dataclass(frozen=True)
class InitialLaw:
    """Joint law of (U, X_0) with U uniform on [0, 1].

    ``variant`` is 'map', 'independent', or 'per_cell'.  Construct through
    the module-level helpers.
    """

    variant: str
    h: Optional[Callable] = None
    dist: Optional[object] = None
    dist_name: str = ""
    cells: Optional[tuple] = None  # per-cell ParticleMeasures

    def psi(self, grid: LabelGrid) -> np.ndarray:
        """Conditional means E[X_0 | U = u_l] on the label grid."""
        if self.variant == "map":
            return np.asarray(self.h(grid.midpoints), dtype=float) * np.ones(grid.ncells)
        if self.variant == "independent":
            return np.full(grid.ncells, float(self.dist.mean()))
        L = len(self.cells)
        cell_means = np.array(
            [m.mean() / m.mass() if m.mass() > 0 else 0.0 for m in self.cells]
        )
        return cell_means[np.minimum((grid.midpoints * L).astype(int), L - 1)]

    def sample(self, labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw X_0 values for given labels, one per label."""
        labels = np.asarray(labels, dtype=float)
        if self.variant == "map":
            return np.asarray(self.h(labels), dtype=float) * np.ones_like(labels)
        if self.variant == "independent":
            return self.dist.rvs(size=labels.shape, random_state=rng)
        L = len(self.cells)
        cell_idx = np.minimum((labels * L).astype(int), L - 1)
        out = np.empty_like(labels)
        for ci in np.unique(cell_idx):
            mask = cell_idx == ci
            m = self.cells[ci]
            if m.mass() == 0:
                raise ValueError(f"cannot sample from empty initial cell {ci}")
            probs = m.w / m.mass()
            out[mask] = rng.choice(m.x, size=int(mask.sum()), p=probs)
        return out

    def density_on_grid(self, grid: LabelGrid, x_grid: np.ndarray) -> np.ndarray:
        """Per-label conditional densities on the state grid.

        Returns an (L, J) array with ``rho[l] . dx = 1`` per label; point
        masses are assigned to the nearest state cell.
        """
        x_grid = np.asarray(x_grid, dtype=float)
        dx = x_grid[1] - x_grid[0]
        L, J = grid.ncells, x_grid.size
        rho = np.zeros((L, J))
        if self.variant == "map":
            x0 = np.asarray(self.h(grid.midpoints), dtype=float) * np.ones(L)
            idx = np.clip(np.rint((x0 - x_grid[0]) / dx).astype(int), 0, J - 1)
            rho[np.arange(L), idx] = 1.0 / dx
            return rho
        if self.variant == "independent":
            edges = np.concatenate([[x_grid[0] - dx / 2], x_grid + dx / 2])
            cdf = self.dist.cdf(edges)
            cell_mass = np.diff(cdf)
            total = cell_mass.sum()
            if total <= 0:
                raise ValueError("initial law puts no mass on the state grid")
            rho[:] = cell_mass / total / dx
            return rho
        Lc = len(self.cells)
        for l in range(L):
            m = self.cells[min(int(grid.midpoints[l] * Lc), Lc - 1)]
            if m.mass() == 0:
                raise ValueError(f"empty initial cell under label {grid.midpoints[l]}")
            idx = np.clip(np.rint((m.x - x_grid[0]) / dx).astype(int), 0, J - 1)
            np.add.at(rho[l], idx, m.w / m.mass() / dx)
        return rho


def deterministic_map(h: Callable) -> InitialLaw:
    """X_0 = h(U) exactly; psi coincides with h."""
    return InitialLaw(variant="map", h=h)


def independent_law(name: str, *args) -> InitialLaw:
    """X_0 independent of U with a named scalar law.

    Supported: ``uniform(lo, hi)``, ``trunc_normal(mean, sd, lo, hi)``,
    ``point(x0)``.
    """
    if name == "uniform":
        lo, hi = args
        dist = stats.uniform(loc=lo, scale=hi - lo)
    elif name == "trunc_normal":
        m, s, lo, hi = args
        dist = stats.truncnorm((lo - m) / s, (hi - m) / s, loc=m, scale=s)
    elif name == "point":
        (x0,) = args
        dist = _PointDist(float(x0))
    else:
        raise ValueError(f"unknown initial law {name!r}")
    return InitialLaw(variant="independent", dist=dist, dist_name=name)


def per_cell_particles(cells) -> InitialLaw:
    """Per-label-cell particle lists; conditional means are mass-weighted."""
    return InitialLaw(variant="per_cell", cells=tuple(ParticleMeasure(m.x, m.w) for m in cells))


class _PointDist:
    """Degenerate law at a point, with the scipy.dist calls used here."""

    def __init__(self, x0: float):
        self.x0 = x0

    def mean(self) -> float:
        return self.x0

    def rvs(self, size, random_state=None):
        return np.full(size, self.x0)

    def cdf(self, x):
        return (np.asarray(x, dtype=float) >= self.x0).astype(float)
