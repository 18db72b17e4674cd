"""Symmetric matrix collections and shared dense linear algebra helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MatrixCollection",
    "EigenFactorization",
    "sym_eig",
    "collection_inner",
    "collection_norm",
    "fiber_view",
]


class MatrixCollection:
    """An ordered collection of L dense symmetric p x p matrices.

    Stored as a single (L, p, p) float64 array. The constructor copies and
    symmetrizes its input (A <- (A + A')/2), so instances behave as immutable
    values; all arithmetic returns new collections.

    Parameters
    ----------
    mats : array_like
        Either an (L, p, p) stack or a sequence of L square matrices.
    """

    __slots__ = ("arr",)

    def __init__(self, mats):
        arr = np.asarray(mats, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError(f"expected an (L, p, p) stack, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ValueError("collection needs at least one matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite entries in matrix collection")
        arr = 0.5 * (arr + arr.transpose(0, 2, 1))
        arr.flags.writeable = False
        self.arr = arr

    # --- constructors -----------------------------------------------------

    @classmethod
    def _wrap(cls, arr: np.ndarray) -> "MatrixCollection":
        # trusted fast path: caller guarantees a fresh symmetric float64 stack
        obj = cls.__new__(cls)
        arr.flags.writeable = False
        obj.arr = arr
        return obj

    @classmethod
    def identity(cls, L: int, p: int) -> "MatrixCollection":
        arr = np.broadcast_to(np.eye(p), (L, p, p)).copy()
        return cls._wrap(arr)

    @classmethod
    def zeros(cls, L: int, p: int) -> "MatrixCollection":
        return cls._wrap(np.zeros((L, p, p)))

    # --- basic queries ----------------------------------------------------

    @property
    def L(self) -> int:
        return self.arr.shape[0]

    @property
    def p(self) -> int:
        return self.arr.shape[1]

    @property
    def mats(self) -> list[np.ndarray]:
        return [self.arr[l] for l in range(self.L)]

    def __iter__(self):
        return iter(self.mats)

    def __getitem__(self, l: int) -> np.ndarray:
        return self.arr[l]

    def __repr__(self) -> str:
        return f"MatrixCollection(L={self.L}, p={self.p})"

    # --- arithmetic (value semantics) --------------------------------------

    def __add__(self, other: "MatrixCollection") -> "MatrixCollection":
        return MatrixCollection._wrap(self.arr + other.arr)

    def __sub__(self, other: "MatrixCollection") -> "MatrixCollection":
        return MatrixCollection._wrap(self.arr - other.arr)

    def __neg__(self) -> "MatrixCollection":
        return MatrixCollection._wrap(-self.arr)

    def __mul__(self, c: float) -> "MatrixCollection":
        return MatrixCollection._wrap(self.arr * float(c))

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "MatrixCollection":
        return MatrixCollection._wrap(self.arr / float(c))

    def inner(self, other: "MatrixCollection") -> float:
        return collection_inner(self, other)

    def norm(self) -> float:
        return float(np.linalg.norm(self.arr))

    def allclose(self, other: "MatrixCollection", atol: float = 0.0, rtol: float = 1e-12) -> bool:
        return np.allclose(self.arr, other.arr, atol=atol, rtol=rtol)


@dataclass(frozen=True)
class EigenFactorization:
    """Eigendecomposition A = Q Diag(d) Q' with eigenvalues sorted descending."""

    Q: np.ndarray
    d: np.ndarray


def sym_eig(A: np.ndarray) -> EigenFactorization:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Parameters
    ----------
    A : (p, p) array_like
        Symmetric matrix. Asymmetry beyond round-off is rejected.

    Returns
    -------
    EigenFactorization
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("non-finite entries")
    scale = max(1.0, float(np.abs(A).max()))
    if np.abs(A - A.T).max() > 1e-8 * scale:
        raise ValueError("matrix is not symmetric")
    w, Q = np.linalg.eigh(0.5 * (A + A.T))
    return EigenFactorization(Q=Q[:, ::-1].copy(), d=w[::-1].copy())


def collection_inner(X: MatrixCollection, Y: MatrixCollection) -> float:
    """Sum over l of the Frobenius inner products <X^(l), Y^(l)>."""
    if X.arr.shape != Y.arr.shape:
        raise ValueError(f"shape mismatch: {X.arr.shape} vs {Y.arr.shape}")
    return float(np.vdot(X.arr, Y.arr))


def collection_norm(X: MatrixCollection) -> float:
    """Frobenius norm of the whole collection, sqrt(collection_inner(X, X))."""
    return X.norm()


def fiber_view(X: MatrixCollection, i: int, j: int) -> np.ndarray:
    """The length-L vector of entries (i, j) across the collection (a copy)."""
    p = X.p
    if not (0 <= i < p and 0 <= j < p):
        raise IndexError(f"entry ({i}, {j}) out of range for p={p}")
    return X.arr[:, i, j].copy()


def _eigh_stack(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched eigendecomposition of an (L, p, p) symmetric stack.

    Returns (d, Q) with d of shape (L, p) descending and Q of shape (L, p, p).
    """
    w, Q = np.linalg.eigh(arr)
    return w[:, ::-1].copy(), Q[:, :, ::-1].copy()
