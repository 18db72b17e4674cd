"""Generalized Jacobians of the proximal maps and the Newton-system operator.

The fused lasso prox on a fiber is piecewise affine; at a point v its
surrogate Jacobian element is M = Diag(upsilon) * Q where Q averages within
the fused blocks of the TV stage output x (cut set K = supp(Bx), the minimal
admissible choice) and upsilon is a 0/1 B-subdifferential mask of the soft
threshold. Q equals I - B'(Sigma_K B B' Sigma_K)^+ B; the block-averaging
form is what gets applied, the pseudo-inverse form is the test oracle.

The operator handed to CG is D -> -sigma*W[D] - sigma*(dphi_plus terms) - D/sigma,
self-adjoint and negative definite, applied matrix-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .linalg import EigenFactorization, MatrixCollection
from .prox import _offdiag_indices, _phi_eigvals, _prox_fgl_arr, prox_fused

__all__ = [
    "FusedProxJacobian",
    "PhiDerivativeCache",
    "NewtonOperator",
    "fused_jacobian",
    "fused_jacobian_apply",
    "phi_derivative_cache",
    "phi_plus_dderiv",
    "FglProxJacobian",
    "fgl_jacobian",
    "newton_apply",
]


@dataclass(frozen=True)
class FusedProxJacobian:
    """One fiber's Jacobian element in structured form.

    blocks: inclusive (start, end) index runs partitioning 0..L-1 (the fused
    groups); upsilon: 0/1 mask of length L, constant within each block.
    """

    blocks: tuple[tuple[int, int], ...]
    upsilon: np.ndarray

    @property
    def L(self) -> int:
        return self.upsilon.shape[0]

    def as_dense(self) -> np.ndarray:
        """Dense L x L matrix M = Diag(upsilon) * block-averaging."""
        L = self.L
        M = np.zeros((L, L))
        for s, e in self.blocks:
            M[s : e + 1, s : e + 1] = 1.0 / (e - s + 1)
        return self.upsilon[:, None] * M


def _upsilon(x: np.ndarray, lambda1: float) -> np.ndarray:
    # At lambda1 = 0 the soft threshold is the identity map, whose only
    # B-subdifferential element is I. For lambda1 > 0 the kink |x| = lambda1
    # resolves to 0.
    if lambda1 == 0.0:
        return np.ones_like(x)
    return (np.abs(x) > lambda1).astype(np.float64)


def _blocks_of(x: np.ndarray) -> tuple[tuple[int, int], ...]:
    # maximal runs of exactly equal consecutive values (the TV stage emits
    # fused segments as bitwise-equal constants, so == is the right test)
    blocks = []
    s = 0
    for t in range(1, x.shape[0]):
        if x[t] != x[t - 1]:
            blocks.append((s, t - 1))
            s = t
    blocks.append((s, x.shape[0] - 1))
    return tuple(blocks)


def fused_jacobian(v, lambda1: float, lambda2: float) -> FusedProxJacobian:
    """Surrogate Jacobian element of the fiber prox at v."""
    r = prox_fused(v, lambda1, lambda2)
    return FusedProxJacobian(blocks=_blocks_of(r.x), upsilon=_upsilon(r.x, lambda1))


def fused_jacobian_apply(J: FusedProxJacobian, w) -> np.ndarray:
    """Apply M = Diag(upsilon)*blockavg to w in O(L) without forming M."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (J.L,):
        raise ValueError(f"length mismatch: {w.shape} vs L={J.L}")
    out = np.empty_like(w)
    for s, e in J.blocks:
        out[s : e + 1] = w[s : e + 1].mean()
    return J.upsilon * out


# ---------------------------------------------------------------------------
# derivative of phi_plus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhiDerivativeCache:
    """Eigendecomposition of the argument plus the divided-difference table
    Gamma_ij = (phi_plus(d_i) + phi_plus(d_j)) / (sqrt(d_i^2+4b) + sqrt(d_j^2+4b)),
    all entries strictly inside (0, 1)."""

    F: EigenFactorization
    gamma: np.ndarray


def _gamma_table(d: np.ndarray, beta: float) -> np.ndarray:
    plus, _ = _phi_eigvals(d, beta)
    s = np.sqrt(d * d + 4.0 * beta)
    return (plus[..., :, None] + plus[..., None, :]) / (s[..., :, None] + s[..., None, :])


def phi_derivative_cache(F: EigenFactorization, beta: float) -> PhiDerivativeCache:
    """Build the derivative cache of phi_plus at the factored matrix."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    return PhiDerivativeCache(F=F, gamma=_gamma_table(F.d, beta))


def phi_plus_dderiv(C: PhiDerivativeCache, B: np.ndarray) -> np.ndarray:
    """Directional derivative of phi_plus at the cached point: Q[Gamma o (Q'BQ)]Q'."""
    B = np.asarray(B, dtype=np.float64)
    p = C.F.Q.shape[0]
    if B.shape != (p, p):
        raise ValueError(f"shape mismatch: {B.shape} vs ({p}, {p})")
    Q = C.F.Q
    M = Q @ (C.gamma * (Q.T @ B @ Q)) @ Q.T
    return 0.5 * (M + M.T)


# ---------------------------------------------------------------------------
# whole-collection Jacobian table and its vectorized application
# ---------------------------------------------------------------------------

@njit(cache=True)
def _fill_block_table(Xtv, lambda1, a, b, ups):
    F, L = Xtv.shape
    for f in range(F):
        s = 0
        for t in range(1, L):
            if Xtv[f, t] != Xtv[f, t - 1]:
                for u in range(s, t):
                    a[f, u] = s
                    b[f, u] = t - 1
                s = t
        for u in range(s, L):
            a[f, u] = s
            b[f, u] = L - 1
        if lambda1 == 0.0:
            for t in range(L):
                ups[f, t] = 1.0
        else:
            for t in range(L):
                ups[f, t] = 1.0 if abs(Xtv[f, t]) > lambda1 else 0.0


class FglProxJacobian:
    """Jacobian table of the collection prox: one fiber element per i < j,
    identity on diagonal fibers, applied vectorized across all fibers."""

    def __init__(self, p: int, L: int, a: np.ndarray, b: np.ndarray, ups: np.ndarray):
        self.p = p
        self.L = L
        self._a = a
        self._bp1 = b + 1
        self._n = (b - a + 1).astype(np.float64)
        self._ups = ups
        self._iu, self._ju = _offdiag_indices(p)
        self._rows = np.arange(a.shape[0])[:, None]

    def fiber(self, i: int, j: int) -> FusedProxJacobian:
        """Structured element for fiber (i, j), i < j."""
        if not (0 <= i < j < self.p):
            raise IndexError(f"need 0 <= i < j < p, got ({i}, {j})")
        f = i * self.p - i * (i + 1) // 2 + (j - i - 1)
        a = self._a[f]
        blocks = []
        t = 0
        while t < self.L:
            s = a[t]
            e = self._bp1[f, t] - 1
            blocks.append((int(s), int(e)))
            t = int(e) + 1
        return FusedProxJacobian(blocks=tuple(blocks), upsilon=self._ups[f].copy())

    def apply_fibers(self, Wf: np.ndarray) -> np.ndarray:
        """Apply all fiber elements to an (n_fibers, L) array of fibers."""
        F, L = Wf.shape
        cs = np.zeros((F, L + 1))
        np.cumsum(Wf, axis=1, out=cs[:, 1:])
        sums = cs[self._rows, self._bp1] - cs[self._rows, self._a]
        return self._ups * (sums / self._n)

    def apply_arr(self, arr: np.ndarray) -> np.ndarray:
        """Apply to an (L, p, p) symmetric stack; diagonal fibers unchanged."""
        out = arr.copy()
        if self._iu.size:
            Wf = np.ascontiguousarray(arr[:, self._iu, self._ju].T)
            Jf = self.apply_fibers(Wf)
            out[:, self._iu, self._ju] = Jf.T
            out[:, self._ju, self._iu] = Jf.T
        return out

    def apply(self, X: MatrixCollection) -> MatrixCollection:
        return MatrixCollection._wrap(self.apply_arr(X.arr))


def _fgl_jacobian_from_tv(Xtv: np.ndarray, eff_lambda1: float, p: int, L: int) -> FglProxJacobian:
    F = Xtv.shape[0]
    a = np.empty((F, L), dtype=np.int64)
    b = np.empty((F, L), dtype=np.int64)
    ups = np.empty((F, L))
    _fill_block_table(Xtv, eff_lambda1, a, b, ups)
    return FglProxJacobian(p, L, a, b, ups)


def fgl_jacobian(U: MatrixCollection, sigma: float, lambda1: float, lambda2: float) -> FglProxJacobian:
    """Jacobian table of U -> Prox at penalty levels sigma*lambda1, sigma*lambda2.

    This is the element used in the Newton operator (the prox the gradient
    evaluates at U is the one with sigma-scaled penalties).
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    _, Xtv = _prox_fgl_arr(U.arr, sigma * lambda1, sigma * lambda2)
    return _fgl_jacobian_from_tv(Xtv, sigma * lambda1, U.p, U.L)


# ---------------------------------------------------------------------------
# Newton operator
# ---------------------------------------------------------------------------

class NewtonOperator:
    """The self-adjoint negative definite map
    D -> -sigma*W[D] - sigma*(dphi_plus(W^(l))[D^(l)])_l - D/sigma."""

    def __init__(self, fgl_jac: FglProxJacobian, phi_caches: tuple[PhiDerivativeCache, ...], sigma: float):
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        self.fgl_jac = fgl_jac
        self.phi_caches = tuple(phi_caches)
        self.sigma = float(sigma)
        self._Q = np.stack([c.F.Q for c in self.phi_caches])
        self._Qt = self._Q.transpose(0, 2, 1)
        self._gam = np.stack([c.gamma for c in self.phi_caches])

    def apply_arr(self, D: np.ndarray) -> np.ndarray:
        sig = self.sigma
        WD = self.fgl_jac.apply_arr(D)
        inner = self._gam * (self._Qt @ D @ self._Q)
        PD = self._Q @ inner @ self._Qt
        PD = 0.5 * (PD + PD.transpose(0, 2, 1))
        return -sig * WD - sig * PD - D / sig


def newton_apply(N: NewtonOperator, D: MatrixCollection) -> MatrixCollection:
    """Apply the Newton operator to a direction collection."""
    if D.arr.shape != (N.fgl_jac.L, N.fgl_jac.p, N.fgl_jac.p):
        raise ValueError("shape mismatch")
    return MatrixCollection._wrap(N.apply_arr(D.arr))
