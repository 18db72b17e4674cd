"""Inner solver: inexact semismooth Newton with CG solves and Armijo search.

Each outer step of the proximal point loop hands this module a strongly
concave subproblem

    maximize  phi_hat(X) = phi(X) - ||X - X_k||^2 / (2 sigma),

where phi is the regularized-dual objective built from two Moreau envelopes.
Writing U(X) = Theta_k + sigma*(X - S) and W^(l)(X) = Omega_k^(l) - sigma*X^(l),

    grad phi_hat(X) = -Prox_{sigma P}(U(X)) + (phi_plus_sigma(W^(l)(X)))_l
                      - (X - X_k)/sigma,

so the gradient evaluation already produces the candidate Theta/Omega updates
and every cache the Newton operator needs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import EigenFactorization, MatrixCollection, _eigh_stack
from .jacobian import (
    NewtonOperator,
    PhiDerivativeCache,
    _fgl_jacobian_from_tv,
    _gamma_table,
)
from .prox import ProblemData, _fgl_penalty_arr, _phi_eigvals, _prox_fgl_arr

__all__ = [
    "SsnParams",
    "SubproblemContext",
    "GradCaches",
    "SsnTrace",
    "CgInfo",
    "CgBreakdownError",
    "LineSearchError",
    "eval_phi_hat",
    "grad_phi_hat",
    "build_newton_operator",
    "cg_solve",
    "ssn_solve",
]

_NOISE = 1e-12  # relative floor below which objective increments are unresolvable


@dataclass(frozen=True)
class SsnParams:
    """Armijo/CG/iteration controls for the Newton inner solver."""

    mu: float = 1e-4
    eta_bar: float = 1e-2
    tau: float = 0.5
    rho: float = 0.5
    max_newton: int = 50
    max_cg: int = 500
    max_backtracks: int = 60

    def __post_init__(self):
        if not (0 < self.mu < 0.5):
            raise ValueError("mu must lie in (0, 1/2)")
        if not (0 < self.eta_bar < 1):
            raise ValueError("eta_bar must lie in (0, 1)")
        if not (0 < self.tau <= 1):
            raise ValueError("tau must lie in (0, 1]")
        if not (0 < self.rho < 1):
            raise ValueError("rho must lie in (0, 1)")


@dataclass
class SubproblemContext:
    """Anchors and scale of one proximal subproblem."""

    Theta_k: MatrixCollection
    Omega_k: MatrixCollection
    X_k: MatrixCollection
    sigma: float
    data: ProblemData

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        shape = self.data.S.arr.shape
        for name in ("Theta_k", "Omega_k", "X_k"):
            if getattr(self, name).arr.shape != shape:
                raise ValueError(f"{name} shape mismatch")
        self._anchor_sq = 0.5 * (self.Theta_k.norm() ** 2) + 0.5 * (self.Omega_k.norm() ** 2)


@dataclass(frozen=True)
class GradCaches:
    """Everything the Newton operator and the outer update reuse from one
    gradient evaluation: the prox input/output, the TV-stage fibers, the
    eigensystem of each W^(l), and the candidate Omega update."""

    U: np.ndarray
    P: np.ndarray
    Xtv: np.ndarray
    Wd: np.ndarray
    WQ: np.ndarray
    OmegaPlus: np.ndarray


@dataclass
class SsnIterRow:
    j: int
    gnorm: float
    cg_iters: int
    cg_resid: float
    step: float
    phi_hat: float


@dataclass
class SsnTrace:
    rows: list = field(default_factory=list)
    status: str = "running"
    gnorm: float = np.inf
    newton_steps: int = 0
    cg_total: int = 0
    theta_cand: np.ndarray | None = None
    omega_cand: np.ndarray | None = None


class CgBreakdownError(RuntimeError):
    def __init__(self, msg, iterate=None, iterations=0):
        super().__init__(msg)
        self.iterate = iterate
        self.iterations = iterations


class LineSearchError(RuntimeError):
    def __init__(self, msg, gnorm=None, slope=None, backtracks=None):
        super().__init__(msg)
        self.gnorm = gnorm
        self.slope = slope
        self.backtracks = backtracks


# ---------------------------------------------------------------------------
# subproblem objective and gradient
# ---------------------------------------------------------------------------

def _value_from_parts(ctx, Xarr, U, W, envp, envt):
    sig = ctx.sigma
    quad = envp - 0.5 * float(np.vdot(U, U)) + envt - 0.5 * float(np.vdot(W, W))
    reg = 0.5 * float(np.vdot(Xarr - ctx.X_k.arr, Xarr - ctx.X_k.arr))
    return (quad + ctx._anchor_sq - reg) / sig


def _eval_value(ctx: SubproblemContext, Xarr: np.ndarray) -> float:
    data = ctx.data
    sig = ctx.sigma
    U = ctx.Theta_k.arr + sig * (Xarr - data.S.arr)
    W = ctx.Omega_k.arr - sig * Xarr
    P, _ = _prox_fgl_arr(U, sig * data.lambda1, sig * data.lambda2)
    envp = sig * _fgl_penalty_arr(P, data.lambda1, data.lambda2) + 0.5 * float(
        np.vdot(P - U, P - U)
    )
    w = np.linalg.eigvalsh(W)
    plus, minus = _phi_eigvals(w, sig)
    envt = float(np.sum(-sig * np.log(plus) + 0.5 * minus * minus))
    return _value_from_parts(ctx, Xarr, U, W, envp, envt)


def _eval_grad(ctx: SubproblemContext, Xarr: np.ndarray):
    data = ctx.data
    sig = ctx.sigma
    U = ctx.Theta_k.arr + sig * (Xarr - data.S.arr)
    W = ctx.Omega_k.arr - sig * Xarr
    P, Xtv = _prox_fgl_arr(U, sig * data.lambda1, sig * data.lambda2)
    envp = sig * _fgl_penalty_arr(P, data.lambda1, data.lambda2) + 0.5 * float(
        np.vdot(P - U, P - U)
    )
    d, Q = _eigh_stack(W)
    plus, minus = _phi_eigvals(d, sig)
    envt = float(np.sum(-sig * np.log(plus) + 0.5 * minus * minus))
    OmegaPlus = (Q * plus[:, None, :]) @ Q.transpose(0, 2, 1)
    OmegaPlus = 0.5 * (OmegaPlus + OmegaPlus.transpose(0, 2, 1))
    grad = -P + OmegaPlus - (Xarr - ctx.X_k.arr) / sig
    value = _value_from_parts(ctx, Xarr, U, W, envp, envt)
    caches = GradCaches(U=U, P=P, Xtv=Xtv, Wd=d, WQ=Q, OmegaPlus=OmegaPlus)
    return value, grad, caches


def eval_phi_hat(ctx: SubproblemContext, X: MatrixCollection) -> float:
    """Value of the regularized subproblem objective at X."""
    return _eval_value(ctx, X.arr)


def grad_phi_hat(ctx: SubproblemContext, X: MatrixCollection):
    """Gradient of the subproblem objective plus reusable caches."""
    _, grad, caches = _eval_grad(ctx, X.arr)
    return MatrixCollection._wrap(grad), caches


def build_newton_operator(ctx: SubproblemContext, caches: GradCaches) -> NewtonOperator:
    """Assemble the Newton operator from one gradient evaluation's caches."""
    data = ctx.data
    sig = ctx.sigma
    fgl_jac = _fgl_jacobian_from_tv(caches.Xtv, sig * data.lambda1, data.p, data.L)
    gam = _gamma_table(caches.Wd, sig)
    phi_caches = tuple(
        PhiDerivativeCache(F=EigenFactorization(Q=caches.WQ[l], d=caches.Wd[l]), gamma=gam[l])
        for l in range(data.L)
    )
    return NewtonOperator(fgl_jac, phi_caches, sig)


# ---------------------------------------------------------------------------
# conjugate gradient on the negated (positive definite) system
# ---------------------------------------------------------------------------

@dataclass
class CgInfo:
    iterations: int
    residual: float
    converged: bool


def cg_solve(N: NewtonOperator, rhs: MatrixCollection, tol: float, max_iter: int):
    """Solve N[D] = rhs for the negative definite Newton operator N.

    CG runs on the negated system (-N)[D] = -rhs, which is positive definite.
    Returns (D, CgInfo); the final residual satisfies ||N[D] - rhs|| <= tol
    unless max_iter was reached (reported in the info flag).
    """
    D, info = _cg_arr(N, rhs.arr, tol, max_iter)
    return MatrixCollection._wrap(D), info


def _cg_arr(N: NewtonOperator, rhs: np.ndarray, tol: float, max_iter: int):
    b = -rhs  # positive definite side
    x = np.zeros_like(b)
    r = b.copy()
    rs = float(np.vdot(r, r))
    if np.sqrt(rs) <= tol:
        return x, CgInfo(0, np.sqrt(rs), True)
    p = r.copy()
    it = 0
    while it < max_iter:
        Ap = -N.apply_arr(p)
        pAp = float(np.vdot(p, Ap))
        if pAp <= 0.0:
            raise CgBreakdownError(
                f"nonpositive curvature {pAp:.3e} in CG (operator not PD)",
                iterate=x,
                iterations=it,
            )
        alpha = rs / pAp
        x += alpha * p
        r -= alpha * Ap
        rs_new = float(np.vdot(r, r))
        it += 1
        if np.sqrt(rs_new) <= tol:
            return x, CgInfo(it, np.sqrt(rs_new), True)
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, CgInfo(it, np.sqrt(rs), False)


# ---------------------------------------------------------------------------
# the Newton loop
# ---------------------------------------------------------------------------

def ssn_solve(
    ctx: SubproblemContext,
    X0: MatrixCollection,
    params: SsnParams | None = None,
    outer_stop: Callable[[float, np.ndarray, np.ndarray], bool] | None = None,
):
    """Maximize the subproblem objective by inexact semismooth Newton steps.

    Parameters
    ----------
    ctx : SubproblemContext
    X0 : starting collection (any symmetric collection is accepted)
    params : SsnParams
    outer_stop : callable (gnorm, theta_candidate, omega_candidate) -> bool
        Caller-supplied stopping rule; the candidates are the outer updates
        this iterate would produce, so implicit criteria can be evaluated
        exactly. Defaults to gnorm <= 1e-10.

    Returns
    -------
    (X, trace) : accepted iterate and an SsnTrace whose status is one of
    "converged", "max_newton", "stalled".
    """
    params = params or SsnParams()
    if outer_stop is None:
        outer_stop = lambda g, th, om: g <= 1e-10
    X = X0.arr.copy()
    trace = SsnTrace()
    val, g, caches = _eval_grad(ctx, X)
    for j in range(params.max_newton + 1):
        gnorm = float(np.linalg.norm(g))
        trace.gnorm = gnorm
        trace.theta_cand = caches.P
        trace.omega_cand = caches.OmegaPlus
        if outer_stop(gnorm, caches.P, caches.OmegaPlus):
            trace.rows.append(SsnIterRow(j, gnorm, 0, 0.0, 0.0, val))
            trace.status = "converged"
            return MatrixCollection._wrap(X), trace
        if j == params.max_newton:
            break
        N = build_newton_operator(ctx, caches)
        cg_tol = min(params.eta_bar, gnorm ** (1.0 + params.tau))
        D, cginfo = _cg_arr(N, -g, cg_tol, params.max_cg)
        trace.cg_total += cginfo.iterations
        dg = float(np.vdot(g, D))
        if dg <= 0.0:
            raise LineSearchError(
                f"CG direction is not an ascent direction (<g, D> = {dg:.3e})",
                gnorm=gnorm,
            )
        # Armijo backtracking on the concave objective
        alpha = 1.0
        accepted = False
        vt = val
        floor = _NOISE * (1.0 + abs(val))
        for m in range(params.max_backtracks + 1):
            Xt = X + alpha * D
            vt = _eval_value(ctx, Xt)
            if vt >= val + params.mu * alpha * dg:
                accepted = True
                break
            if params.mu * alpha * dg <= floor and abs(vt - val) <= floor:
                break  # requested and observed increments are below float resolution
            alpha *= params.rho
        if not accepted:
            if abs(vt - val) <= floor:
                # objective increments have sunk below float resolution
                trace.status = "stalled"
                trace.newton_steps = j
                return MatrixCollection._wrap(X), trace
            raise LineSearchError(
                f"Armijo search failed after {params.max_backtracks} backtracks",
                gnorm=gnorm,
                slope=params.mu * dg,
                backtracks=params.max_backtracks,
            )
        X = Xt
        val, g, caches = _eval_grad(ctx, X)
        trace.rows.append(SsnIterRow(j, gnorm, cginfo.iterations, cginfo.residual, alpha, val))
        trace.newton_steps = j + 1
    trace.status = "max_newton"
    return MatrixCollection._wrap(X), trace
