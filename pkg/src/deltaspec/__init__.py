"""Bound states of Schrodinger operators with a delta-potential on a hyperplane.

The lowest eigenvalue is located as the zero of the spectral function of a
reduced half-order operator on the hyperplane, cross-checked against a direct
finite-difference discretization of the full operator, with rearrangement
machinery for the shape-optimization inequality between a coupling and the
symmetric decreasing rearrangement of its positive part.
"""

from .errors import ConfigError, InvariantViolation, SolverError
from .grid import (
    Grid,
    GridFunction,
    load_grid_function,
    make_grid,
    norm,
    save_grid_function,
    transform,
)
from .potential import (
    Coupling,
    constant_coupling,
    indicator_coupling,
    perturbation_coupling,
    positive_part,
    random_bump_coupling,
    sample_coupling,
)
from .rearrange import (
    RankedCells,
    hardy_littlewood_pairing,
    lp_norm,
    ranked_cells,
    ranked_cells_from_points,
    steiner_symmetrize,
    symmetric_decreasing_rearrangement,
)
from .relop import (
    RelativisticOperator,
    SolverConfig,
    SpectralResult,
    apply,
    form_value,
    lowest_eigenvalue,
    make_operator,
)
from .bsp import (
    BoundStateReport,
    RootConfig,
    essential_threshold,
    essential_threshold_D,
    evaluate_reconstruction,
    find_lambda1,
    gamma_trace_multiplier,
    reconstruct_eigenfunction,
    write_mu_curve,
)
from .oracle import (
    AssembledOperator,
    BoxFunction,
    BoxGrid,
    GroundStateReport,
    SurfaceSpec,
    assemble,
    embed_transverse_profile,
    ground_state_checks,
    load_box_eigenvector,
    lowest_eigenpair,
    save_box_eigenvector,
    steiner_rayleigh_check,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "InvariantViolation",
    "SolverError",
    "Grid",
    "GridFunction",
    "make_grid",
    "transform",
    "norm",
    "save_grid_function",
    "load_grid_function",
    "Coupling",
    "constant_coupling",
    "indicator_coupling",
    "perturbation_coupling",
    "random_bump_coupling",
    "positive_part",
    "sample_coupling",
    "RankedCells",
    "ranked_cells",
    "ranked_cells_from_points",
    "symmetric_decreasing_rearrangement",
    "hardy_littlewood_pairing",
    "steiner_symmetrize",
    "lp_norm",
    "RelativisticOperator",
    "SolverConfig",
    "SpectralResult",
    "make_operator",
    "apply",
    "form_value",
    "lowest_eigenvalue",
    "RootConfig",
    "BoundStateReport",
    "essential_threshold",
    "essential_threshold_D",
    "gamma_trace_multiplier",
    "find_lambda1",
    "reconstruct_eigenfunction",
    "evaluate_reconstruction",
    "write_mu_curve",
    "BoxGrid",
    "SurfaceSpec",
    "BoxFunction",
    "AssembledOperator",
    "GroundStateReport",
    "assemble",
    "lowest_eigenpair",
    "ground_state_checks",
    "steiner_rayleigh_check",
    "embed_transverse_profile",
    "save_box_eigenvector",
    "load_box_eigenvector",
    "__version__",
]
