"""Graphon-game toolkit.

Computes graphon-game equilibria (closed form for the linear-quadratic
flocking model, a forward-backward PDE fixed point for general bounded
models) and empirically verifies that they induce approximate Nash equilibria
in finite n-player games whose interaction matrices converge in cut norm.
"""

from .initial import InitialLaw, deterministic_map, independent_law, per_cell_particles
from .kernels import (
    Kernel,
    LabelGrid,
    NormResult,
    apply_to_function,
    apply_to_measure,
    constant_kernel,
    cut_norm_step,
    degree,
    is_constant_degree,
    l1_norm,
    l2_norm,
    min_kernel,
    opnorm_inf_to_1,
    psd_check,
    step_kernel,
    tabulated_kernel,
    two_block_kernel,
)
from .lq import (
    KatzRadiusError,
    LQParams,
    LQSolution,
    LQSolvabilityError,
    equilibrium_control,
    katz_centrality,
    solve_lq,
    verify_mckean_vlasov,
)
from .measures import (
    LabelStateMeasure,
    MeasureFlow,
    ParticleMeasure,
    bl_distance,
    neighborhood_measure,
)
from .networks import (
    InteractionMatrix,
    LabelAssignment,
    condition_A,
    cut_distance_to,
    erdos_renyi,
    laplacian_matrix,
    sample_from_graphon,
)

__version__ = "0.1.0"
