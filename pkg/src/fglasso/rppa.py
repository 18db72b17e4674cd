"""Outer loop: a regularized proximal point method for the fused penalized
maximum-likelihood problem.

Each outer iteration maximizes a strongly concave subproblem with the
semismooth Newton solver, accepts the candidate (Theta, Omega) updates that
the final gradient evaluation already produced, measures progress with the
primal KKT residual eta_P, and grows the proximal parameter sigma.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .linalg import MatrixCollection
from .prox import ProblemData, _prox_fgl_arr, primal_objective
from .ssn import LineSearchError, SsnParams, SubproblemContext, ssn_solve

__all__ = [
    "RppaParams",
    "SolverReport",
    "OuterTraceRow",
    "kkt_residual_primal",
    "rppa_solve",
    "warm_start",
]


def _default_seq(k: int) -> float:
    return 0.5 * 0.7 ** k


@dataclass(frozen=True)
class RppaParams:
    """Controls for the outer proximal point loop.

    eps_seq and delta_seq map the outer index k to the summable tolerance
    sequences used by the two inner acceptance criteria; the defaults are
    geometric with ratio 0.7, hence summable by construction.
    """

    tol: float = 1e-6
    sigma0: float = 1.0
    sigma_growth: float = 1.6
    sigma_max: float = 1e6
    eps_seq: Callable[[int], float] = _default_seq
    delta_seq: Callable[[int], float] = _default_seq
    max_outer: int = 100
    warm_start_iters: int = 200
    max_resumptions: int = 3
    ssn: SsnParams = SsnParams()

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if self.sigma_growth < 1:
            raise ValueError("sigma_growth must be >= 1")
        if self.sigma_max < self.sigma0:
            raise ValueError("sigma_max must be >= sigma0")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")
        if self.warm_start_iters < 0:
            raise ValueError("warm_start_iters must be >= 0")


@dataclass
class OuterTraceRow:
    """One outer-iteration record, shared by both solvers so comparison
    tables line up (the operator-splitting baseline reports newton = cg = 0)."""

    k: int
    sigma: float
    eta: float
    newton: int
    cg: int
    objective: float


@dataclass
class SolverReport:
    Theta: MatrixCollection
    Omega: MatrixCollection
    X: MatrixCollection
    eta_p: float
    objective: float
    outer_iters: int
    total_newton: int
    total_cg: int
    trace: list
    converged: bool
    seconds: float = 0.0
    method: str = "rppa"
    Z: Optional[MatrixCollection] = None
    warnings: tuple = ()


# ---------------------------------------------------------------------------
# KKT residual
# ---------------------------------------------------------------------------

def _check_shapes(data, **colls):
    shape = data.S.arr.shape
    for name, c in colls.items():
        if c.arr.shape != shape:
            raise ValueError(f"{name} has shape {c.arr.shape}, expected {shape}")


def _kkt_primal_parts(Theta, Omega, X, data):
    th, om, x, s = Theta.arr, Omega.arr, X.arr, data.S.arr
    P, _ = _prox_fgl_arr(th + x - s, data.lambda1, data.lambda2)
    nth = 1.0 + float(np.linalg.norm(th))
    t1 = float(np.linalg.norm(th - P)) / nth
    t2 = float(np.linalg.norm(th - om)) / nth
    eye = np.eye(data.p)
    t3 = max(
        float(np.linalg.norm(om[l] @ x[l] - eye)) for l in range(data.L)
    ) / (1.0 + np.sqrt(data.p))
    return t1, t2, t3


def kkt_residual_primal(
    Theta: MatrixCollection, Omega: MatrixCollection, X: MatrixCollection, data: ProblemData
) -> float:
    """Relative primal KKT residual eta_P.

    Maximum of the prox fixed-point gap ||Theta - Prox_P(Theta + X - S)||,
    the feasibility gap ||Theta - Omega|| (both relative to 1 + ||Theta||),
    and the inversion gap max_l ||Omega^(l) X^(l) - I|| / (1 + sqrt(p)).
    """
    _check_shapes(data, Theta=Theta, Omega=Omega, X=X)
    return max(_kkt_primal_parts(Theta, Omega, X, data))


# ---------------------------------------------------------------------------
# warm start
# ---------------------------------------------------------------------------

def warm_start(data: ProblemData, iters: int, tol_factor: float = 100.0, tol: float = 1e-6):
    """Initialize the proximal point loop from a short baseline run.

    Runs the operator-splitting baseline from its identity start for at most
    `iters` iterations, stopping early once its residual drops below
    tol_factor * tol, and maps the iterates into outer-loop variables
    (Theta and Omega both from the baseline's multiplier, X from its X).

    Returns
    -------
    (Theta, Omega, X) : MatrixCollection triple; identity collections when
    iters <= 0.
    """
    if iters <= 0:
        eye = MatrixCollection.identity(data.L, data.p)
        return eye, eye, eye
    from .admm import AdmmParams, admm_solve  # deferred: admm imports this module

    rep = admm_solve(data, AdmmParams(tol=tol_factor * tol, max_iter=iters))
    return rep.Theta, rep.Theta, rep.X


# ---------------------------------------------------------------------------
# the outer loop
# ---------------------------------------------------------------------------

def rppa_solve(
    data: ProblemData,
    params: Optional[RppaParams] = None,
    init=None,
) -> SolverReport:
    """Solve the fused penalized maximum-likelihood problem.

    Parameters
    ----------
    data : ProblemData
    params : RppaParams, optional
    init : optional (Theta, Omega, X) triple of MatrixCollections; when
        absent a warm start with params.warm_start_iters iterations is used.

    Returns
    -------
    SolverReport with converged = (eta_p <= params.tol).

    Notes
    -----
    Each subproblem is solved until both inner acceptance tests hold: the
    gradient norm falls below eps_k / sigma_k, and below
    (delta_k / sigma_k) * ||(Theta_new, Omega_new) - (Theta_k, Omega_k)||
    evaluated on the candidate update. If the inner solver returns without
    meeting them it is resumed from its last iterate at most
    params.max_resumptions times, then the iterate is accepted and a warning
    is recorded on the report.
    """
    params = params or RppaParams()
    t0 = time.perf_counter()
    if init is None:
        Theta, Omega, X = warm_start(data, params.warm_start_iters, 100.0, params.tol)
    else:
        Theta, Omega, X = init
    _check_shapes(data, Theta=Theta, Omega=Omega, X=X)

    sigma = params.sigma0
    trace: list = []
    warnings_acc: list = []
    total_newton = 0
    total_cg = 0
    converged = False
    eta = kkt_residual_primal(Theta, Omega, X, data)

    for k in range(params.max_outer + 1):
        if eta <= params.tol:
            converged = True
            break
        if k == params.max_outer:
            break
        eps_k = params.eps_seq(k)
        delta_k = params.delta_seq(k)
        th_arr = Theta.arr
        om_arr = Omega.arr
        sig = sigma

        def stop(gnorm, th_c, om_c):
            if gnorm > eps_k / sig:
                return False
            dth = th_c - th_arr
            dom = om_c - om_arr
            diff = np.sqrt(float(np.vdot(dth, dth)) + float(np.vdot(dom, dom)))
            return diff == 0.0 or gnorm <= (delta_k / sig) * diff

        ctx = SubproblemContext(Theta_k=Theta, Omega_k=Omega, X_k=X, sigma=sigma, data=data)
        newton_k = 0
        cg_k = 0
        try:
            Xn, strace = ssn_solve(ctx, X, params.ssn, stop)
            newton_k += strace.newton_steps
            cg_k += strace.cg_total
            resumed = 0
            while strace.status != "converged" and resumed < params.max_resumptions:
                Xn, strace = ssn_solve(ctx, Xn, params.ssn, stop)
                newton_k += strace.newton_steps
                cg_k += strace.cg_total
                resumed += 1
            if strace.status != "converged":
                warnings_acc.append(
                    f"outer {k}: inner solve accepted after {resumed} resumptions "
                    f"with status {strace.status} (grad norm {strace.gnorm:.3e})"
                )
        except LineSearchError as e:
            raise LineSearchError(
                f"inner solve failed at outer iteration {k} (sigma={sigma:.4g}): {e}",
                gnorm=e.gnorm,
                slope=e.slope,
                backtracks=e.backtracks,
            ) from e

        Theta = MatrixCollection._wrap(strace.theta_cand.copy())
        Omega = MatrixCollection._wrap(strace.omega_cand.copy())
        X = Xn
        total_newton += newton_k
        total_cg += cg_k
        eta = kkt_residual_primal(Theta, Omega, X, data)
        obj = primal_objective(Theta, data)
        trace.append(
            OuterTraceRow(k=k, sigma=sigma, eta=eta, newton=newton_k, cg=cg_k, objective=obj)
        )
        sigma = min(sigma * params.sigma_growth, params.sigma_max)

    return SolverReport(
        Theta=Theta,
        Omega=Omega,
        X=X,
        eta_p=eta,
        objective=primal_objective(Theta, data),
        outer_iters=len(trace),
        total_newton=total_newton,
        total_cg=total_cg,
        trace=trace,
        converged=converged,
        seconds=time.perf_counter() - t0,
        method="rppa",
        warnings=tuple(warnings_acc),
    )
