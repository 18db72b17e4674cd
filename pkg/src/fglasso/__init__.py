"""Fused graphical lasso estimation for collections of precision matrices.

Estimates L related sparse precision matrices from per-class sample
covariances by penalized maximum likelihood: an elementwise l1 penalty plus
an l1 fusion penalty on consecutive differences. Ships two solvers (a
proximal point method with semismooth Newton subproblem solves, and an
operator-splitting baseline), the proximal/Jacobian machinery they share, a
synthetic data pipeline, recovery metrics, and a CLI (`fglasso`).
"""

from .linalg import (
    EigenFactorization,
    MatrixCollection,
    collection_inner,
    collection_norm,
    fiber_view,
    sym_eig,
)
from .io import (
    FormatError,
    parse_record,
    read_obs,
    read_smc,
    write_jsonl,
    write_obs,
    write_record,
    write_smc,
)
from .prox import (
    FusedProxResult,
    ProblemData,
    fgl_penalty,
    moreau_env_fgl,
    moreau_env_logdet,
    phi_minus,
    phi_plus,
    primal_objective,
    prox_fgl,
    prox_fused,
    soft_threshold,
    tv_denoise,
)
from .jacobian import (
    FglProxJacobian,
    FusedProxJacobian,
    NewtonOperator,
    PhiDerivativeCache,
    fgl_jacobian,
    fused_jacobian,
    fused_jacobian_apply,
    newton_apply,
    phi_derivative_cache,
    phi_plus_dderiv,
)
from .ssn import (
    CgBreakdownError,
    GradCaches,
    LineSearchError,
    SsnParams,
    SubproblemContext,
    cg_solve,
    eval_phi_hat,
    grad_phi_hat,
    ssn_solve,
)
from .rppa import (
    OuterTraceRow,
    RppaParams,
    SolverReport,
    kkt_residual_primal,
    rppa_solve,
    warm_start,
)
from .admm import AdmmParams, admm_solve, kkt_residual_dual
from .data import (
    EdgeMetrics,
    SyntheticInstance,
    edge_metrics,
    gen_nearest_neighbour,
    log_entropy_covariances,
    sample_covariance,
    sample_gaussian,
)

__version__ = "0.1.0"

__all__ = [
    "EigenFactorization",
    "MatrixCollection",
    "collection_inner",
    "collection_norm",
    "fiber_view",
    "sym_eig",
    "FormatError",
    "parse_record",
    "read_obs",
    "read_smc",
    "write_jsonl",
    "write_obs",
    "write_record",
    "write_smc",
    "FusedProxResult",
    "ProblemData",
    "fgl_penalty",
    "moreau_env_fgl",
    "moreau_env_logdet",
    "phi_minus",
    "phi_plus",
    "primal_objective",
    "prox_fgl",
    "prox_fused",
    "soft_threshold",
    "tv_denoise",
    "FglProxJacobian",
    "FusedProxJacobian",
    "NewtonOperator",
    "PhiDerivativeCache",
    "fgl_jacobian",
    "fused_jacobian",
    "fused_jacobian_apply",
    "newton_apply",
    "phi_derivative_cache",
    "phi_plus_dderiv",
    "CgBreakdownError",
    "GradCaches",
    "LineSearchError",
    "SsnParams",
    "SubproblemContext",
    "cg_solve",
    "eval_phi_hat",
    "grad_phi_hat",
    "ssn_solve",
    "OuterTraceRow",
    "RppaParams",
    "SolverReport",
    "kkt_residual_primal",
    "rppa_solve",
    "warm_start",
    "AdmmParams",
    "admm_solve",
    "kkt_residual_dual",
    "EdgeMetrics",
    "SyntheticInstance",
    "edge_metrics",
    "gen_nearest_neighbour",
    "log_entropy_covariances",
    "sample_covariance",
    "sample_gaussian",
    "__version__",
]
