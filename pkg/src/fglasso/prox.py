"""Proximal mappings and Moreau envelopes for the fused graphical lasso.

The composite penalty on a collection Theta of L precision matrices is

    P(Theta) = lambda1 * sum_l sum_{i!=j} |Theta^(l)_ij|
             + lambda2 * sum_{l=2..L} sum_{i!=j} |Theta^(l)_ij - Theta^(l-1)_ij|,

which separates across off-diagonal entry fibers v = (Theta^(1)_ij, ..., Theta^(L)_ij)
into phi(v) = lambda1*||v||_1 + lambda2*||Bv||_1 with B the forward difference
operator on the chain. Its prox factors through a 1-D total variation stage
followed by soft thresholding; the TV stage is solved exactly by a direct
forward (taut-string style) pass. The log-determinant part is handled by the
spectral pair phi_plus/phi_minus.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .linalg import EigenFactorization, MatrixCollection

__all__ = [
    "ProblemData",
    "FusedProxResult",
    "soft_threshold",
    "prox_fused",
    "prox_fgl",
    "fgl_penalty",
    "phi_plus",
    "phi_minus",
    "moreau_env_logdet",
    "moreau_env_fgl",
    "primal_objective",
]

# positive definiteness test: smallest eigenvalue > PD_RTOL * max(1, largest)
PD_RTOL = 1e-12


@dataclass(frozen=True)
class ProblemData:
    """Problem instance: covariance collection and the two penalty levels."""

    S: MatrixCollection
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("penalty levels must be nonnegative")
        if self.S.L < 2:
            raise ValueError("need at least two classes (L >= 2)")

    @property
    def p(self) -> int:
        return self.S.p

    @property
    def L(self) -> int:
        return self.S.L


@dataclass(frozen=True)
class FusedProxResult:
    """Output of the fused lasso prox on one entry fiber.

    x is the total-variation stage output, z its dual certificate
    (z_j = sum_{i<=j} (v_i - x_i), with ||z||_inf <= lambda2), and
    prox = soft_threshold(x, lambda1) is the prox value itself.
    """

    x: np.ndarray
    z: np.ndarray
    prox: np.ndarray


def soft_threshold(v, lam: float):
    """Elementwise sign(v) * max(|v| - lam, 0)."""
    if lam < 0:
        raise ValueError("negative threshold")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


# ---------------------------------------------------------------------------
# exact 1-D total variation: direct forward pass
# ---------------------------------------------------------------------------

def _tv1d_core(y, lam, x):
    # Direct non-iterative pass keeping a tube of height 2*lam around the
    # running sums; segment values are emitted when the tube forces a jump.
    n = y.shape[0]
    if n == 0:
        return
    if lam <= 0.0:
        for i in range(n):
            x[i] = y[i]
        return
    k = 0
    k0 = 0
    km = 0
    kp = 0
    vmin = y[0] - lam
    vmax = y[0] + lam
    umin = lam
    umax = -lam
    while True:
        while k == n - 1:
            if umin < 0.0:
                # lower string taut: emit a falling segment
                while k0 <= km:
                    x[k0] = vmin
                    k0 += 1
                k = k0
                km = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + lam - vmax
            elif umax > 0.0:
                # upper string taut: emit a rising segment
                while k0 <= kp:
                    x[k0] = vmax
                    k0 += 1
                k = k0
                kp = k0
                vmax = y[k0]
                umax = -lam
                umin = vmax - lam - vmin
            else:
                vmin += umin / (k - k0 + 1)
                while k0 <= k:
                    x[k0] = vmin
                    k0 += 1
                return
        umin_n = umin + y[k + 1] - vmin
        umax_n = umax + y[k + 1] - vmax
        if umin_n < -lam:
            # negative jump
            while k0 <= km:
                x[k0] = vmin
                k0 += 1
            k = k0
            km = k0
            kp = k0
            vmin = y[k0]
            vmax = y[k0] + 2.0 * lam
            umin = lam
            umax = -lam
        elif umax_n > lam:
            # positive jump
            while k0 <= kp:
                x[k0] = vmax
                k0 += 1
            k = k0
            km = k0
            kp = k0
            vmax = y[k0]
            vmin = y[k0] - 2.0 * lam
            umin = lam
            umax = -lam
        else:
            k += 1
            umin = umin_n
            umax = umax_n
            if umin >= lam:
                vmin += (umin - lam) / (k - k0 + 1)
                umin = lam
                km = k
            if umax <= -lam:
                vmax += (umax + lam) / (k - k0 + 1)
                umax = -lam
                kp = k


_tv1d = njit(cache=True)(_tv1d_core)


@njit(cache=True)
def _tv_batch(V, lam, out):
    # rows of V are independent fibers
    for f in range(V.shape[0]):
        _tv1d(V[f], lam, out[f])


def tv_denoise(v: np.ndarray, lam: float) -> np.ndarray:
    """Exact solution of min_x lam*sum|x_{i+1}-x_i| + 0.5*||x - v||^2."""
    if lam < 0:
        raise ValueError("negative penalty")
    v = np.ascontiguousarray(v, dtype=np.float64)
    x = np.empty_like(v)
    _tv1d(v, lam, x)
    return x


def prox_fused(v, lambda1: float, lambda2: float) -> FusedProxResult:
    """Prox of phi(x) = lambda1*||x||_1 + lambda2*||Bx||_1 on one fiber.

    Parameters
    ----------
    v : length-L vector, L >= 2
    lambda1, lambda2 : nonnegative penalty levels

    Returns
    -------
    FusedProxResult
        x (TV stage), z (dual certificate, length L-1), prox (final value).
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("negative penalties")
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] < 2:
        raise ValueError("fiber must be a vector of length >= 2")
    x = tv_denoise(v, lambda2)
    z = np.cumsum(v - x)[:-1]
    return FusedProxResult(x=x, z=z, prox=soft_threshold(x, lambda1))


@lru_cache(maxsize=32)
def _offdiag_indices(p: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(p, k=1)


def _prox_fgl_arr(arr: np.ndarray, lambda1: float, lambda2: float):
    """Fiberwise fused prox on an (L, p, p) stack; diagonals pass through.

    Returns (prox stack, TV-stage fibers as an (n_fibers, L) array).
    """
    L, p, _ = arr.shape
    iu, ju = _offdiag_indices(p)
    V = np.ascontiguousarray(arr[:, iu, ju].T)
    Xtv = np.empty_like(V)
    _tv_batch(V, lambda2, Xtv)
    Pf = soft_threshold(Xtv, lambda1)
    out = arr.copy()
    out[:, iu, ju] = Pf.T
    out[:, ju, iu] = Pf.T
    return out, Xtv


def prox_fgl(X: MatrixCollection, lambda1: float, lambda2: float) -> MatrixCollection:
    """Prox of the fused graphical lasso penalty on a symmetric collection.

    Applies the fiber prox to every off-diagonal fiber (i < j, mirrored);
    diagonal entries carry no penalty and pass through unchanged.
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("negative penalties")
    out, _ = _prox_fgl_arr(X.arr, lambda1, lambda2)
    return MatrixCollection._wrap(out)


def _fgl_penalty_arr(arr: np.ndarray, lambda1: float, lambda2: float) -> float:
    p = arr.shape[1]
    mask = ~np.eye(p, dtype=bool)
    off = arr[:, mask]
    val = lambda1 * float(np.abs(off).sum())
    if arr.shape[0] > 1:
        val += lambda2 * float(np.abs(np.diff(off, axis=0)).sum())
    return val


def fgl_penalty(Theta: MatrixCollection, lambda1: float, lambda2: float) -> float:
    """Penalty value: l1 on off-diagonals plus l1 on consecutive differences."""
    return _fgl_penalty_arr(Theta.arr, lambda1, lambda2)


# ---------------------------------------------------------------------------
# log-determinant prox pair
# ---------------------------------------------------------------------------

def _phi_eigvals(d: np.ndarray, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Stable elementwise (sqrt(d^2+4b)+d)/2 and (sqrt(d^2+4b)-d)/2."""
    s = np.sqrt(d * d + 4.0 * beta)
    pos = d >= 0
    plus = np.where(pos, 0.5 * (s + d), 2.0 * beta / (s - d))
    minus = np.where(pos, 2.0 * beta / (s + d), 0.5 * (s - d))
    return plus, minus


def phi_plus(F: EigenFactorization, beta: float) -> np.ndarray:
    """Prox of beta * (-log det) at the factored matrix; symmetric PD output."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    plus, _ = _phi_eigvals(F.d, beta)
    M = (F.Q * plus) @ F.Q.T
    return 0.5 * (M + M.T)


def phi_minus(F: EigenFactorization, beta: float) -> np.ndarray:
    """Moreau complement of phi_plus: phi_plus - phi_minus = A, product beta*I."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    _, minus = _phi_eigvals(F.d, beta)
    M = (F.Q * minus) @ F.Q.T
    return 0.5 * (M + M.T)


def _phi_plus_stack(d: np.ndarray, Q: np.ndarray, beta: float) -> np.ndarray:
    """Batched phi_plus over an eigendecomposed (L, p, p) stack."""
    plus, _ = _phi_eigvals(d, beta)
    M = (Q * plus[:, None, :]) @ Q.transpose(0, 2, 1)
    return 0.5 * (M + M.transpose(0, 2, 1))


def moreau_env_logdet(F: EigenFactorization, beta: float) -> float:
    """min_{X > 0} of beta*(-log det X) + 0.5*||X - A||^2, from eigenvalues."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    plus, minus = _phi_eigvals(F.d, beta)
    return float(np.sum(-beta * np.log(plus) + 0.5 * minus * minus))


def _moreau_env_logdet_eigs(d: np.ndarray, beta: float) -> float:
    plus, minus = _phi_eigvals(d, beta)
    return float(np.sum(-beta * np.log(plus) + 0.5 * minus * minus))


def moreau_env_fgl(U: MatrixCollection, sigma: float, lambda1: float, lambda2: float) -> float:
    """Envelope of sigma*P at U: sigma*P(prox) + 0.5*||prox - U||^2."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    P = prox_fgl(U, sigma * lambda1, sigma * lambda2)
    return sigma * fgl_penalty(P, lambda1, lambda2) + 0.5 * (P - U).norm() ** 2


def primal_objective(Theta: MatrixCollection, data: ProblemData) -> float:
    """Negative log-likelihood plus penalty; +inf when any matrix is not PD."""
    w = np.linalg.eigvalsh(Theta.arr)
    wmin = w[:, 0]
    wmax = w[:, -1]
    if np.any(wmin <= PD_RTOL * np.maximum(1.0, wmax)):
        return np.inf
    loglik = float(np.sum(np.log(w))) - float(np.vdot(data.S.arr, Theta.arr))
    return -loglik + fgl_penalty(Theta, data.lambda1, data.lambda2)
