"""Interaction-matrix constructions and convergence diagnostics.

Three canonical ways to produce an n x n nonnegative interaction matrix with
zero diagonal: Erdos-Renyi adjacency (optionally normalized by the edge
probability so the sparse construction targets the constant kernel 1),
sampling a bounded kernel at sorted uniform labels (simple Bernoulli edges or
exact weighted edges), and the random-walk Laplacian of a graph, which always
yields a constant-degree step kernel.

Convergence toward a target kernel is diagnosed numerically: a heuristic cut
distance on the common refinement grid (a certified lower bound), the
vanishing-second-moment statistic ``(1/n^3) sum xi_ij^2``, and the strong
operator topology probed on a fixed dictionary of test functions.  The
toolkit never decides convergence, it only measures it.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import lcm
from typing import Optional

import numpy as np

from .kernels import Kernel, NormResult, cut_norm_step, step_kernel

__all__ = [
    "InteractionMatrix",
    "LabelAssignment",
    "erdos_renyi",
    "sample_from_graphon",
    "laplacian_matrix",
    "condition_A",
    "cut_distance_to",
    "l1_distance_to",
    "strong_operator_distance",
    "probe_function_dictionary",
    "save_matrix_text",
    "load_matrix_text",
    "save_edge_list",
    "load_edge_list",
    "save_labels_csv",
    "load_labels_csv",
]


@dataclass(frozen=True)
class InteractionMatrix:
    """n x n nonnegative matrix with zero diagonal and a provenance tag."""

    entries: np.ndarray
    provenance: str = "explicit"

    def __init__(self, entries, provenance: str = "explicit"):
        m = np.array(entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("interaction matrix must be square")
        if m.size and m.min() < 0:
            raise ValueError("interaction matrix entries must be nonnegative")
        if m.size and np.any(np.diagonal(m) != 0):
            raise ValueError("interaction matrix must have zero diagonal")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        object.__setattr__(self, "provenance", provenance)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def kernel(self) -> Kernel:
        return step_kernel(self.entries)


@dataclass(frozen=True)
class LabelAssignment:
    """Labels u_1..u_n with u_i in the cell I_i = [(i-1)/n, i/n]."""

    labels: np.ndarray
    scheme: str

    def __init__(self, labels, scheme: str):
        u = np.array(labels, dtype=float).ravel()
        u.setflags(write=False)
        object.__setattr__(self, "labels", u)
        object.__setattr__(self, "scheme", scheme)
        n = u.size
        if scheme in ("midpoint", "random_per_cell"):
            cells_lo = np.arange(n) / n
            cells_hi = (np.arange(n) + 1) / n
            if np.any(u < cells_lo) or np.any(u > cells_hi):
                raise ValueError("per-cell labels must satisfy u_i in I_i")
        elif scheme == "iid_uniform_sorted":
            if np.any(np.diff(u) < 0):
                raise ValueError("sampled labels must be sorted")
        else:
            raise ValueError(f"unknown label scheme {scheme!r}")

    @property
    def n(self) -> int:
        return self.labels.size

    @staticmethod
    def midpoint(n: int) -> "LabelAssignment":
        return LabelAssignment((np.arange(n) + 0.5) / n, "midpoint")

    @staticmethod
    def random_per_cell(n: int, seed: int) -> "LabelAssignment":
        rng = np.random.default_rng(seed)
        u = (np.arange(n) + rng.uniform(size=n)) / n
        return LabelAssignment(u, "random_per_cell")


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------


def erdos_renyi(n: int, p: float, normalize: bool = False, seed: Optional[int] = None) -> InteractionMatrix:
    """Symmetric Erdos-Renyi adjacency with independent edges.

    With ``normalize`` the entries are divided by p, targeting the constant
    kernel 1; unnormalized, the step kernels converge in cut norm to the
    constant kernel p.
    """
    if not 0 < p <= 1:
        raise ValueError("edge probability must lie in (0, 1]")
    if seed is None:
        raise ValueError("erdos_renyi requires an explicit seed")
    rng = np.random.default_rng(seed)
    upper = rng.random((n, n)) < p
    adj = np.triu(upper, k=1)
    m = (adj | adj.T).astype(float)
    if normalize:
        m /= p
    tag = f"er(n={n}, p={p}, normalized={normalize}, seed={seed})"
    return InteractionMatrix(m, provenance=tag)


def sample_from_graphon(
    kernel: Kernel,
    n: int,
    weighted: bool = False,
    seed: Optional[int] = None,
) -> tuple[InteractionMatrix, LabelAssignment]:
    """Sample an interaction matrix from a bounded kernel.

    Draws iid uniform labels and sorts them (order statistics), so player i's
    label lands near i/n and the matrix plugs into the same per-cell label
    plumbing as the other constructions.  Simple mode connects i ~ j with
    probability W(U_i, U_j) and requires W <= 1; weighted mode stores
    W(U_i, U_j) itself and requires a known sup bound.
    """
    if seed is None:
        raise ValueError("sample_from_graphon requires an explicit seed")
    if kernel.sup_bound is None:
        raise ValueError("sampling requires a kernel with a known sup bound")
    rng = np.random.default_rng(seed)
    u = np.sort(rng.uniform(size=n))
    values = kernel(u[:, None], u[None, :])
    if weighted:
        m = values.copy()
    else:
        if values.max() > 1.0:
            raise ValueError("simple-graph sampling requires W <= 1")
        upper = rng.random((n, n)) < values
        adj = np.triu(upper, k=1)
        m = (adj | adj.T).astype(float)
    np.fill_diagonal(m, 0.0)
    mode = "weighted" if weighted else "simple"
    tag = f"sampled_{mode}(n={n}, seed={seed})"
    labels = LabelAssignment(u, "iid_uniform_sorted")
    return InteractionMatrix(m, provenance=tag), labels


def laplacian_matrix(adjacency) -> InteractionMatrix:
    """Random-walk Laplacian weights ``xi_ij = (n/d_i) 1{i ~ j}``.

    The induced neighborhood measure is the uniform measure over the states
    of the neighbors, and the step kernel has out-degree identically 1.
    """
    adj = np.asarray(adjacency, dtype=float)
    n = adj.shape[0]
    if adj.shape != (n, n):
        raise ValueError("adjacency must be square")
    if not np.array_equal(adj, adj.T) or not np.isin(adj, (0.0, 1.0)).all():
        raise ValueError("adjacency must be a symmetric 0/1 matrix")
    if np.any(np.diagonal(adj) != 0):
        raise ValueError("adjacency must have zero diagonal")
    deg = adj.sum(axis=1)
    isolated = np.flatnonzero(deg < 1)
    if isolated.size:
        raise ValueError(f"isolated vertex at index {int(isolated[0])}")
    m = (n / deg)[:, None] * adj
    return InteractionMatrix(m, provenance="laplacian")


# ---------------------------------------------------------------------------
# Convergence diagnostics
# ---------------------------------------------------------------------------


def condition_A(xi: InteractionMatrix | np.ndarray) -> float:
    """The vanishing-variance statistic ``(1/n^3) sum_ij xi_ij^2``."""
    m = xi.entries if isinstance(xi, InteractionMatrix) else np.asarray(xi, dtype=float)
    n = m.shape[0]
    return float((m**2).sum()) / n**3


MAX_REFINEMENT_CELLS = 4096


def _difference_on_refinement(xi: InteractionMatrix, kernel: Kernel, resolution: int) -> np.ndarray:
    n = xi.n
    blocks = kernel.block_count
    cells = lcm(n, blocks) if blocks is not None else lcm(n, resolution)
    if cells > MAX_REFINEMENT_CELLS:
        raise ValueError(
            f"common refinement needs {cells} cells (max {MAX_REFINEMENT_CELLS}); "
            "choose a resolution commensurable with n"
        )
    mids = (np.arange(cells) + 0.5) / cells
    own = xi.kernel()(mids[:, None], mids[None, :])
    target = kernel(mids[:, None], mids[None, :])
    return own - target


def cut_distance_to(
    xi: InteractionMatrix,
    kernel: Kernel,
    resolution: int = 64,
    restarts: int = 64,
    seed: Optional[int] = None,
) -> NormResult:
    """Heuristic cut-norm distance from the step kernel of ``xi`` to ``kernel``.

    The difference kernel is formed on the common refinement grid (lcm of the
    two block counts, or of n and ``resolution`` for analytic targets) and its
    cut norm is lower-bounded by alternating maximization.  The certificate
    sets index refinement cells.
    """
    diff = _difference_on_refinement(xi, kernel, resolution)
    result = cut_norm_step(diff, mode="heuristic", restarts=restarts, seed=seed)
    return NormResult(
        name="cut_distance",
        value=result.value,
        mode=result.mode,
        certificate=result.certificate,
    )


def l1_distance_to(xi: InteractionMatrix, kernel: Kernel, resolution: int = 64) -> float:
    """L1 distance to the target kernel on the common refinement grid."""
    diff = _difference_on_refinement(xi, kernel, resolution)
    return float(np.abs(diff).mean())


def probe_function_dictionary(resolution: int) -> dict[str, np.ndarray]:
    """Fixed 16-function dictionary: dyadic indicators and low-order polynomials."""
    nodes = (np.arange(resolution) + 0.5) / resolution
    funcs: dict[str, np.ndarray] = {}
    for level in (1, 2, 3):
        parts = 2**level
        for j in range(parts):
            lo, hi = j / parts, (j + 1) / parts
            funcs[f"ind[{lo:g},{hi:g})"] = ((nodes >= lo) & (nodes < hi)).astype(float)
    funcs["poly:1"] = np.ones_like(nodes)
    funcs["poly:u"] = nodes.copy()
    return funcs


def strong_operator_distance(
    xi: InteractionMatrix,
    kernel: Kernel,
    resolution: int = 64,
) -> dict[str, float]:
    """Per-function L1 gaps ``||(W_xi - W) phi||_L1`` over the test dictionary.

    The strong operator topology is defined by per-function convergence; no
    single number certifies it, so the whole table is returned.
    """
    diff = _difference_on_refinement(xi, kernel, resolution)
    cells = diff.shape[0]
    out = {}
    for name, phi in probe_function_dictionary(cells).items():
        out[name] = float(np.abs(diff @ phi / cells).mean())
    return out


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------


def save_matrix_text(path, xi: InteractionMatrix | np.ndarray) -> None:
    """Dense whitespace-separated text, one row per line."""
    m = xi.entries if isinstance(xi, InteractionMatrix) else np.asarray(xi, dtype=float)
    np.savetxt(path, m, fmt="%.17g")


def load_matrix_text(path, provenance: str = "explicit") -> InteractionMatrix:
    m = np.loadtxt(path, dtype=float, ndmin=2)
    return InteractionMatrix(m, provenance=provenance)


def save_edge_list(path, xi: InteractionMatrix) -> None:
    """Sparse ``i j value`` text with 0-based indices, zero entries omitted."""
    rows, cols = np.nonzero(xi.entries)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={xi.n}\n")
        for i, j in zip(rows.tolist(), cols.tolist()):
            fh.write(f"{i} {j} {xi.entries[i, j]:.17g}\n")


def load_edge_list(path, provenance: str = "explicit") -> InteractionMatrix:
    n = None
    triples = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "n=" in line:
                    n = int(line.split("n=")[1])
                continue
            i_s, j_s, v_s = line.split()
            triples.append((int(i_s), int(j_s), float(v_s)))
    if n is None:
        n = 1 + max(max(i, j) for i, j, _ in triples) if triples else 0
    m = np.zeros((n, n))
    for i, j, v in triples:
        m[i, j] = v
    return InteractionMatrix(m, provenance=provenance)


def save_labels_csv(path, labels: LabelAssignment) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("index,label\n")
        for i, u in enumerate(labels.labels.tolist()):
            fh.write(f"{i},{u:.17g}\n")


def load_labels_csv(path, scheme: str = "midpoint") -> LabelAssignment:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    order = np.argsort(data[:, 0])
    return LabelAssignment(data[order, 1], scheme)
