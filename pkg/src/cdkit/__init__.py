"""Projection-free conic programming with a memory-light semidefinite engine.

The solver minimizes a smooth convex function over a convex cone using only
linear minimization oracles: per iteration an exact minimization along the
current ray, a momentum average of gradients, one cone LMO call, and a line
search along the returned atom. The negative pairing of the momentum vector
with the atom is a computable distance to the dual cone and doubles as the
stopping certificate.

For semidefinite problems the matrix iterate is never stored; see cdkit.sdp.
"""

from .cones import (
    Cone,
    NonnegativeOrthant,
    PsdCone,
    PsdOperatorCone,
    SecondOrderCone,
    brute_lmo,
    dual_distance,
    lmo_orthant,
    lmo_psd_dense,
    lmo_soc,
    nuclear_norm,
    operator_norm,
)
from .core import (
    ConicProgram,
    IterateState,
    SolveResult,
    SolveTrace,
    SolverConfig,
    TraceRecord,
    delta_schedule,
    dual_certificate,
    kkt_residuals,
    line_search_step,
    minimize_convex_1d,
    momentum_update,
    ray_minimize,
    solve,
)
from .exceptions import (
    DegenerateSignal,
    EigFailure,
    InnerSolverStall,
    LineSearchDivergence,
    LmoFailure,
    NonFiniteValue,
    RankTooLarge,
    SolverError,
    UnsupportedCone,
)
from .problems import (
    add_noise_snr,
    build_matcomp,
    build_orthant_quadratic,
    build_phase_retrieval,
    build_trace_toy,
    dct_measurement_apply,
    dump_instance,
    load_instance,
    read_pgm,
    recovery_error,
)
from .sdp import (
    GreedyConfig,
    LanczosConfig,
    MeasurementOperator,
    SdpResult,
    SdpState,
    SketchState,
    factor_to_dense,
    fw_baseline_step,
    fw_solve,
    greedy_step,
    load_factor,
    min_eig_lanczos,
    save_factor,
    sdp_solve,
    sketch_reconstruct,
    theta_heuristic,
)
from .verify import (
    PhiTracker,
    fd_gradient_check,
    phi_lower_bound,
    smoothness_gap_check,
)

__version__ = "0.1.0"

__all__ = [
    "Cone",
    "ConicProgram",
    "DegenerateSignal",
    "EigFailure",
    "GreedyConfig",
    "InnerSolverStall",
    "IterateState",
    "LanczosConfig",
    "LineSearchDivergence",
    "LmoFailure",
    "MeasurementOperator",
    "NonFiniteValue",
    "NonnegativeOrthant",
    "PhiTracker",
    "PsdCone",
    "PsdOperatorCone",
    "RankTooLarge",
    "SdpResult",
    "SdpState",
    "SecondOrderCone",
    "SketchState",
    "SolveResult",
    "SolveTrace",
    "SolverConfig",
    "SolverError",
    "TraceRecord",
    "UnsupportedCone",
    "add_noise_snr",
    "brute_lmo",
    "build_matcomp",
    "build_orthant_quadratic",
    "build_phase_retrieval",
    "build_trace_toy",
    "dct_measurement_apply",
    "delta_schedule",
    "dual_certificate",
    "dual_distance",
    "dump_instance",
    "factor_to_dense",
    "fd_gradient_check",
    "fw_baseline_step",
    "fw_solve",
    "greedy_step",
    "kkt_residuals",
    "line_search_step",
    "lmo_orthant",
    "lmo_psd_dense",
    "lmo_soc",
    "load_factor",
    "load_instance",
    "min_eig_lanczos",
    "minimize_convex_1d",
    "momentum_update",
    "nuclear_norm",
    "operator_norm",
    "phi_lower_bound",
    "ray_minimize",
    "read_pgm",
    "recovery_error",
    "save_factor",
    "sdp_solve",
    "sketch_reconstruct",
    "smoothness_gap_check",
    "solve",
    "theta_heuristic",
]
