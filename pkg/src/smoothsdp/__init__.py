"""Low-rank factored solver for trace-constrained semidefinite programs.

The package solves problems of the form

    minimize  <C, X>  subject to  A(X) = b,  X >= 0

by factoring X = Y Y* with a thin factor Y and running a Riemannian
trust-region method on the feasible manifold, over the real or complex
field.  It ships a-posteriori optimality certificates computed from any
approximate second-order stationary factor, closed-form rank and gap
bounds for randomly perturbed costs, and a complete phase retrieval
(PhaseCut) front end with instance generation, rounding and a CLI.
"""

from .certificates import (
    Certificate,
    certify,
    deterministic_gap_bound,
    dual_lower_bound,
    lambda_min_S,
    sosp_eigenvalue_bound,
    theorem_gap_bound,
    unperturbed_gap_bound,
    zeta,
)
from .geometry import (
    RetractionKind,
    TangentVector,
    check_tangent,
    objective,
    retract,
    riemannian_gradient,
    riemannian_hessian_apply,
    second_order_form,
    tangent_project,
    tangent_residual,
)
from .model import (
    DenseConstraints,
    DiagonalConstraints,
    FactorPoint,
    FieldTag,
    ModelError,
    RankDeficiencyError,
    RetractionError,
    SdpProblem,
    TangencyError,
    build_factor_point,
    estimate_projector_bound,
    feasibility_residual,
)
from .phasecut import (
    B_FLOOR,
    PhasecutInstance,
    PhasecutSolution,
    build_cost,
    build_sdp,
    default_rank,
    generate_clean_instance,
    generate_instance,
    recovery_error,
    round_solution,
)
from .serialize import (
    dumps_sorted,
    factor_from_json,
    factor_to_json,
    instance_from_json,
    instance_to_json,
    problem_from_json,
    problem_to_json,
    read_json,
    solution_from_json,
    solution_to_json,
    write_json,
)
from .smoothing import (
    SmoothedParams,
    WignerSpec,
    eta,
    fosp_sigma_bound,
    kappa,
    min_rank,
    perturb_cost,
    sample_wigner,
    wigner_norm_event,
)
from .solver import (
    SolveResult,
    SolverOptions,
    SospReport,
    measure_sosp,
    random_feasible_point,
    solve,
    truncated_cg,
)

__version__ = "0.1.0"

__all__ = [
    "B_FLOOR",
    "Certificate",
    "DenseConstraints",
    "DiagonalConstraints",
    "FactorPoint",
    "FieldTag",
    "ModelError",
    "PhasecutInstance",
    "PhasecutSolution",
    "RankDeficiencyError",
    "RetractionError",
    "RetractionKind",
    "SdpProblem",
    "SmoothedParams",
    "SolveResult",
    "SolverOptions",
    "SospReport",
    "TangencyError",
    "TangentVector",
    "WignerSpec",
    "build_cost",
    "build_factor_point",
    "build_sdp",
    "certify",
    "check_tangent",
    "default_rank",
    "deterministic_gap_bound",
    "dual_lower_bound",
    "dumps_sorted",
    "estimate_projector_bound",
    "eta",
    "factor_from_json",
    "factor_to_json",
    "feasibility_residual",
    "fosp_sigma_bound",
    "generate_clean_instance",
    "generate_instance",
    "instance_from_json",
    "instance_to_json",
    "kappa",
    "lambda_min_S",
    "measure_sosp",
    "min_rank",
    "objective",
    "perturb_cost",
    "problem_from_json",
    "problem_to_json",
    "random_feasible_point",
    "read_json",
    "recovery_error",
    "retract",
    "riemannian_gradient",
    "riemannian_hessian_apply",
    "round_solution",
    "sample_wigner",
    "second_order_form",
    "solution_from_json",
    "solution_to_json",
    "solve",
    "sosp_eigenvalue_bound",
    "tangent_project",
    "tangent_residual",
    "theorem_gap_bound",
    "truncated_cg",
    "unperturbed_gap_bound",
    "wigner_norm_event",
    "write_json",
    "zeta",
]
