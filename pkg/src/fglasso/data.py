"""Data pipeline: synthetic network generation, Gaussian sampling, sample
covariances, a log-entropy text-count transform, and edge-recovery metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .linalg import MatrixCollection

__all__ = [
    "SyntheticInstance",
    "EdgeMetrics",
    "sample_covariance",
    "gen_nearest_neighbour",
    "sample_gaussian",
    "log_entropy_covariances",
    "edge_metrics",
]


@dataclass(frozen=True)
class SyntheticInstance:
    """Ground truth plus observations for one synthetic experiment.

    true_precisions holds the L precision matrices, samples one (N x p)
    observation matrix per class (empty tuple when no samples were
    requested), and n_edges_true the total number of upper-triangle
    nonzeros across all L networks.
    """

    true_precisions: MatrixCollection
    samples: tuple
    seed: int
    m: int
    n_edges_true: int


@dataclass(frozen=True)
class EdgeMetrics:
    tp_edges: int
    fp_edges: int
    sse: float
    tp_diff: int
    fp_diff: int
    nnz: int
    density: float


def sample_covariance(observations: np.ndarray) -> np.ndarray:
    """Sample covariance with the unbiased 1/(N-1) normalization.

    Parameters
    ----------
    observations : (N, p) array, one observation per row. N >= 2.

    Returns
    -------
    (p, p) symmetric positive semidefinite array.
    """
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 2:
        raise ValueError("observations must be a 2-d array")
    n = obs.shape[0]
    if n < 2:
        raise ValueError("need at least 2 observations")
    if not np.all(np.isfinite(obs)):
        raise ValueError("observations must be finite")
    centered = obs - obs.mean(axis=0)
    s = centered.T @ centered / (n - 1)
    return 0.5 * (s + s.T)


def _mutual_nn_pairs(points: np.ndarray, m: int) -> np.ndarray:
    """Upper-triangle index pairs (i < j) of the mutual m-nearest-neighbour
    graph of the given points."""
    p = points.shape[0]
    if m <= 0:
        return np.empty((0, 2), dtype=np.int64)
    d2 = ((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    nn = np.argsort(d2, axis=1)[:, :m]
    adj = np.zeros((p, p), dtype=bool)
    rows = np.repeat(np.arange(p), m)
    adj[rows, nn.ravel()] = True
    mutual = adj & adj.T
    iu, ju = np.triu_indices(p, k=1)
    keep = mutual[iu, ju]
    return np.stack([iu[keep], ju[keep]], axis=1)


def _draw_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    # uniform on [-1, -0.5] U [0.5, 1]
    mag = rng.uniform(0.5, 1.0, size=n)
    sign = rng.integers(0, 2, size=n) * 2 - 1
    return sign * mag


def gen_nearest_neighbour(p: int, L: int, m: int, seed: int, n_samples: int = 0) -> SyntheticInstance:
    """Generate L related sparse precision matrices from a geometric graph.

    p points are placed uniformly on the unit square and joined when each is
    among the other's m nearest neighbours; every such shared edge gets one
    weight drawn uniformly from [-1, -0.5] U [0.5, 1], common to all L
    matrices. Each matrix then receives ceil(M/4) additional individual
    edges (M = shared edge count) at currently-zero positions with fresh
    weights. Diagonals are set to the row absolute sum plus 0.1 and the
    matrix is symmetrically rescaled to unit diagonal, which keeps it
    positive definite.

    Parameters
    ----------
    p : number of variables (p >= m + 1)
    L : number of classes (>= 2)
    m : neighbour count (>= 0)
    seed : RNG seed; the instance is a pure function of (p, L, m, seed,
        n_samples)
    n_samples : observations to draw per class from N(0, inverse precision);
        0 means no samples.

    Returns
    -------
    SyntheticInstance
    """
    if p < m + 1 or p < 1:
        raise ValueError("need p >= m + 1 points")
    if L < 2:
        raise ValueError("need at least two classes")
    if m < 0:
        raise ValueError("m must be nonnegative")
    if n_samples < 0:
        raise ValueError("n_samples must be nonnegative")
    rng = np.random.default_rng(seed)
    points = rng.random((p, 2))
    pairs = _mutual_nn_pairs(points, m)
    M = pairs.shape[0]
    n_ind = math.ceil(M / 4)
    if M + n_ind > p * (p - 1) // 2:
        raise ValueError("graph too dense to place individual edges")

    base_w = _draw_weights(rng, M)
    base_set = {(int(i), int(j)) for i, j in pairs}
    mats = np.zeros((L, p, p))
    for l in range(L):
        W = np.zeros((p, p))
        W[pairs[:, 0], pairs[:, 1]] = base_w
        used = set(base_set)
        placed = 0
        while placed < n_ind:
            i = int(rng.integers(0, p))
            j = int(rng.integers(0, p))
            if i == j:
                continue
            a, b = (i, j) if i < j else (j, i)
            if (a, b) in used:
                continue
            used.add((a, b))
            W[a, b] = _draw_weights(rng, 1)[0]
            placed += 1
        W = W + W.T
        d = np.abs(W).sum(axis=1) + 0.1
        omega = (W + np.diag(d)) / np.sqrt(np.outer(d, d))
        np.fill_diagonal(omega, 1.0)
        mats[l] = omega

    precisions = MatrixCollection(mats)
    iu, ju = np.triu_indices(p, k=1)
    n_edges = int(np.count_nonzero(precisions.arr[:, iu, ju]))

    samples = ()
    if n_samples > 0:
        child_seeds = rng.integers(0, 2 ** 63 - 1, size=L)
        samples = tuple(
            sample_gaussian(precisions.arr[l], n_samples, int(child_seeds[l])) for l in range(L)
        )
    return SyntheticInstance(
        true_precisions=precisions,
        samples=samples,
        seed=seed,
        m=m,
        n_edges_true=n_edges,
    )


def sample_gaussian(precision: np.ndarray, N: int, seed: int) -> np.ndarray:
    """Draw N i.i.d. rows from the zero-mean Gaussian whose covariance is
    the inverse of the given precision matrix.

    Uses the Cholesky factor R of the precision (precision = R Rᵀ) and
    returns standard normals solved against Rᵀ, so the covariance is
    (R Rᵀ)⁻¹ exactly in distribution.
    """
    prec = np.asarray(precision, dtype=float)
    if prec.ndim != 2 or prec.shape[0] != prec.shape[1]:
        raise ValueError("precision must be square")
    if N < 1:
        raise ValueError("N must be positive")
    try:
        chol = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError as e:
        raise ValueError("precision matrix is not positive definite") from e
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((N, prec.shape[0]))
    # x = R^{-T} z  gives cov(x) = (R R^T)^{-1}
    return scipy.linalg.solve_triangular(chol, z.T, lower=True, trans="T").T


def log_entropy_covariances(counts: Sequence[np.ndarray]) -> MatrixCollection:
    """Turn per-class term counts into per-class sample covariances using
    log-entropy weighting.

    The class matrices (documents x terms) are stacked, each column is
    normalized to a distribution P over all D documents, each term gets the
    weight e_j = 1 + sum_i P_ij ln(P_ij) / ln D (zero counts contribute
    zero), entries are transformed to e_j * ln(1 + count), and the transformed
    rows are split back per class and passed through sample_covariance.

    Parameters
    ----------
    counts : sequence of (N_l, T) nonnegative count matrices, one per class,
        all with the same term set; every term must appear at least once
        overall and every class needs N_l >= 2.

    Returns
    -------
    MatrixCollection of the L per-class covariance matrices.
    """
    if len(counts) < 1:
        raise ValueError("need at least one class")
    mats = [np.asarray(c, dtype=float) for c in counts]
    T = mats[0].shape[1] if mats[0].ndim == 2 else -1
    for c in mats:
        if c.ndim != 2 or c.shape[1] != T:
            raise ValueError("count matrices must share the same term columns")
        if c.shape[0] < 2:
            raise ValueError("each class needs at least 2 documents")
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise ValueError("counts must be finite and nonnegative")
    X = np.vstack(mats)
    D = X.shape[0]
    col = X.sum(axis=0)
    if np.any(col <= 0):
        raise ValueError("every term must appear in at least one document")
    P = X / col
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    e = 1.0 + plogp.sum(axis=0) / np.log(D)
    Xbar = e * np.log1p(X)
    covs = []
    start = 0
    for c in mats:
        stop = start + c.shape[0]
        covs.append(sample_covariance(Xbar[start:stop]))
        start = stop
    return MatrixCollection(np.stack(covs))


def edge_metrics(
    est: MatrixCollection, truth: MatrixCollection, zero_tol: float = 1e-6
) -> EdgeMetrics:
    """Edge-recovery scores of an estimated collection against the truth.

    An edge (i < j) counts as selected when its magnitude exceeds zero_tol;
    true/false positives are tallied per matrix, squared error is summed
    over all upper-triangle positions, and differential counts compare
    consecutive matrices with the same threshold on estimate and truth.
    nnz is the smallest number of largest-magnitude entries (all p*p*L of
    them, sorted) holding 99.9% of the total absolute mass; density is
    nnz / (p*p*L).
    """
    if est.arr.shape != truth.arr.shape:
        raise ValueError("est and truth shapes differ")
    if zero_tol < 0:
        raise ValueError("zero_tol must be nonnegative")
    L, p, _ = est.arr.shape
    iu, ju = np.triu_indices(p, k=1)
    e_off = est.arr[:, iu, ju]
    t_off = truth.arr[:, iu, ju]
    e_sel = np.abs(e_off) > zero_tol
    t_sel = np.abs(t_off) > zero_tol
    tp = int(np.count_nonzero(e_sel & t_sel))
    fp = int(np.count_nonzero(e_sel & ~t_sel))
    sse = float(((e_off - t_off) ** 2).sum())
    e_dif = np.abs(np.diff(e_off, axis=0)) > zero_tol
    t_dif = np.abs(np.diff(t_off, axis=0)) > zero_tol
    tp_diff = int(np.count_nonzero(e_dif & t_dif))
    fp_diff = int(np.count_nonzero(e_dif & ~t_dif))

    flat = np.sort(np.abs(est.arr).ravel())[::-1]
    total = float(flat.sum())
    if total == 0.0:
        nnz = 0
    else:
        cs = np.cumsum(flat)
        nnz = int(np.searchsorted(cs, 0.999 * total, side="left")) + 1
    return EdgeMetrics(
        tp_edges=tp,
        fp_edges=fp,
        sse=sse,
        tp_diff=tp_diff,
        fp_diff=fp_diff,
        nnz=nnz,
        density=nnz / flat.size,
    )
