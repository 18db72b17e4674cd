"""Operator-splitting baseline: ADMM on the dual of the fused penalized
maximum-likelihood problem.

The three-block sweep is

    X^(l) <- phi_plus_{1/sigma}(Z^(l) - Theta^(l)/sigma + S^(l))
    Z     <- V - Prox_P(V),   V = X + Theta/sigma - S
    Theta <- Theta + tau * sigma * (X - Z - S)

where Prox_P uses the penalty weights lambda1, lambda2 themselves: the
Z-step is a Euclidean projection onto the dual-feasible polytope, and
projections are invariant under positive scaling of the indicator, so the
sigma-scaled and unscaled forms coincide. The multiplier Theta converges to
the primal precision estimate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .linalg import MatrixCollection, _eigh_stack
from .prox import ProblemData, _phi_eigvals, _prox_fgl_arr, primal_objective
from .rppa import OuterTraceRow, SolverReport

__all__ = ["AdmmParams", "admm_solve", "kkt_residual_dual"]

_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class AdmmParams:
    """Step length, penalty, and adaptation controls.

    sigma is rebalanced every adapt_every iterations: multiplied by
    adapt_scale when the feasibility residual exceeds adapt_ratio times the
    dual residual, divided by it in the opposite case.
    """

    tau: float = 1.618
    sigma0: float = 1.0
    tol: float = 1e-6
    max_iter: int = 20000
    adapt_ratio: float = 5.0
    adapt_scale: float = 1.5
    adapt_every: int = 20
    trace_every: int = 10

    def __post_init__(self):
        if not (0.0 < self.tau < _GOLDEN):
            raise ValueError("tau must lie in (0, (1+sqrt(5))/2)")
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.adapt_ratio <= 1 or self.adapt_scale <= 1:
            raise ValueError("adaptation thresholds must exceed 1")


def _kkt_dual_parts(th, x, z, data):
    s = data.S.arr
    P, _ = _prox_fgl_arr(th + z, data.lambda1, data.lambda2)
    nth = 1.0 + float(np.linalg.norm(th))
    t1 = float(np.linalg.norm(th - P)) / nth
    t2 = float(np.linalg.norm(x - z - s)) / (1.0 + float(np.linalg.norm(s)))
    eye = np.eye(data.p)
    t3 = max(
        float(np.linalg.norm(th[l] @ x[l] - eye)) for l in range(data.L)
    ) / (1.0 + np.sqrt(data.p))
    return t1, t2, t3


def kkt_residual_dual(
    Theta: MatrixCollection, X: MatrixCollection, Z: MatrixCollection, data: ProblemData
) -> float:
    """Relative dual-side KKT residual eta_A.

    Maximum of ||Theta - Prox_P(Theta + Z)|| / (1 + ||Theta||), the
    feasibility gap ||X - Z - S|| / (1 + ||S||), and
    max_l ||Theta^(l) X^(l) - I|| / (1 + sqrt(p)).
    """
    shape = data.S.arr.shape
    for name, c in (("Theta", Theta), ("X", X), ("Z", Z)):
        if c.arr.shape != shape:
            raise ValueError(f"{name} has shape {c.arr.shape}, expected {shape}")
    return max(_kkt_dual_parts(Theta.arr, X.arr, Z.arr, data))


def _phi_plus_arr(W: np.ndarray, beta: float) -> np.ndarray:
    d, Q = _eigh_stack(W)
    plus, _ = _phi_eigvals(d, beta)
    out = (Q * plus[:, None, :]) @ Q.transpose(0, 2, 1)
    return 0.5 * (out + out.transpose(0, 2, 1))


def admm_solve(
    data: ProblemData,
    params: Optional[AdmmParams] = None,
    init=None,
) -> SolverReport:
    """Run the splitting baseline until eta_A <= tol or max_iter.

    Parameters
    ----------
    data : ProblemData
    params : AdmmParams, optional
    init : optional (Theta, X, Z) triple of MatrixCollections; defaults to
        identity Theta and X with zero Z.

    Returns
    -------
    SolverReport with Theta duplicated into the Omega slot (the multiplier
    is the primal estimate), the auxiliary Z attached, and newton/cg counts
    of zero.
    """
    params = params or AdmmParams()
    t0 = time.perf_counter()
    L, p = data.L, data.p
    s = data.S.arr
    if init is None:
        th = np.broadcast_to(np.eye(p), (L, p, p)).copy()
        x = th.copy()
        z = np.zeros((L, p, p))
    else:
        Theta0, X0, Z0 = init
        th = Theta0.arr.copy()
        x = X0.arr.copy()
        z = Z0.arr.copy()
        if th.shape != s.shape or x.shape != s.shape or z.shape != s.shape:
            raise ValueError("init shapes must match data")

    sigma = params.sigma0
    tau = params.tau
    trace: list = []
    converged = False
    eta = np.inf
    it = 0

    def record(i):
        trace.append(
            OuterTraceRow(
                k=i,
                sigma=sigma,
                eta=eta,
                newton=0,
                cg=0,
                objective=primal_objective(MatrixCollection._wrap(th.copy()), data),
            )
        )

    for it in range(1, params.max_iter + 1):
        x = _phi_plus_arr(z - th / sigma + s, 1.0 / sigma)
        v = x + th / sigma - s
        prox_v, _ = _prox_fgl_arr(v, data.lambda1, data.lambda2)
        z_old = z
        z = v - prox_v
        r = x - z - s
        th = th + (tau * sigma) * r
        eta = max(_kkt_dual_parts(th, x, z, data))
        if eta <= params.tol:
            converged = True
            record(it)
            break
        if it % params.trace_every == 0:
            record(it)
        if it % params.adapt_every == 0:
            r_norm = float(np.linalg.norm(r))
            s_norm = sigma * float(np.linalg.norm(z - z_old))
            if r_norm > params.adapt_ratio * s_norm:
                sigma *= params.adapt_scale
            elif s_norm > params.adapt_ratio * r_norm:
                sigma /= params.adapt_scale

    if not converged and (not trace or trace[-1].k != it):
        record(it)

    Theta = MatrixCollection._wrap(th)
    return SolverReport(
        Theta=Theta,
        Omega=MatrixCollection._wrap(th.copy()),
        X=MatrixCollection._wrap(x),
        eta_p=eta,
        objective=primal_objective(Theta, data),
        outer_iters=it,
        total_newton=0,
        total_cg=0,
        trace=trace,
        converged=converged,
        seconds=time.perf_counter() - t0,
        method="admm",
        Z=MatrixCollection._wrap(z),
    )
