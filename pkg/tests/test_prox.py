import numpy as np
import pytest
from scipy.optimize import lsq_linear, minimize_scalar

from fglasso.linalg import MatrixCollection, sym_eig
from fglasso.prox import (
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


def _fiber_objective(x, v, l1, l2):
    return 0.5 * np.sum((x - v) ** 2) + l1 * np.sum(np.abs(x)) + l2 * np.sum(np.abs(np.diff(x)))


def _diff_matrix(L):
    B = np.zeros((L - 1, L))
    for j in range(L - 1):
        B[j, j] = -1.0
        B[j, j + 1] = 1.0
    return B


def _certified_gap(v, l1, l2):
    """Duality gap of prox_fused's output against an independently solved
    dual: min over box-constrained (s, z) of ||v - s - B' z||^2 via BVLS.
    The dual value lower-bounds the optimum, so the gap certifies optimality."""
    L = len(v)
    x = prox_fused(v, l1, l2).prox
    A = np.hstack([np.eye(L), _diff_matrix(L).T])
    lb = np.concatenate([np.full(L, -l1), np.full(L - 1, -l2)])
    sol = lsq_linear(A, v, bounds=(lb, -lb), method="bvls", tol=1e-14)
    dual = 0.5 * np.sum(v ** 2) - 0.5 * np.sum((v - A @ sol.x) ** 2)
    return _fiber_objective(x, v, l1, l2) - dual


# ---------------------------------------------------------------------------
# soft threshold and total variation stage
# ---------------------------------------------------------------------------

def test_soft_threshold_hand_values():
    v = np.array([-3.0, -1.0, -0.5, 0.0, 0.5, 1.0, 3.0])
    out = soft_threshold(v, 1.0)
    assert np.allclose(out, [-2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0])
    assert np.allclose(soft_threshold(v, 0.0), v)
    out2 = soft_threshold(np.array([2.5]), 0.25)
    assert np.allclose(out2, [2.25])


def test_tv_denoise_certified_by_duality_gap():
    # dual feasibility + zero gap is a complete optimality certificate:
    # with z_j = sum_{i<=j}(x_i - v_i) the identity x = v - B'z is telescoping,
    # so |z|_inf <= lam and gap ~ 0 prove x optimal.
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(300):
        n = int(rng.integers(1, 40))
        lam = float(rng.uniform(0.01, 3.0))
        v = rng.normal(0, rng.uniform(0.5, 3.0), n)
        x = tv_denoise(v, lam)
        z = np.cumsum(x - v)[:-1]
        scale = max(1.0, float(np.abs(v).max()))
        assert np.abs(z).max(initial=0.0) <= lam * (1 + 1e-12)
        assert abs(np.sum(x - v)) <= 1e-10 * scale
        primal = 0.5 * np.sum((x - v) ** 2) + lam * np.sum(np.abs(np.diff(x)))
        dual = 0.5 * np.sum(v ** 2) - 0.5 * np.sum((v - (v - x)) ** 2)
        # dual value written directly in terms of B'z = v - x
        gap = primal - (np.dot(v - x, v) - 0.5 * np.sum((v - x) ** 2))
        worst = max(worst, gap / (1 + abs(primal)))
    assert worst <= 1e-12


def test_tv_denoise_edge_cases():
    v = np.array([4.0, -2.0, 7.5])
    assert np.allclose(tv_denoise(v, 0.0), v)
    assert np.allclose(tv_denoise(np.array([3.0]), 5.0), [3.0])
    # constants are fixed points at any level
    c = np.full(9, 2.5)
    assert np.allclose(tv_denoise(c, 10.0), c)
    # huge penalty flattens to the mean
    rng = np.random.default_rng(8)
    v = rng.normal(size=12)
    assert np.allclose(tv_denoise(v, 1e6), np.full(12, v.mean()), atol=1e-9)


# ---------------------------------------------------------------------------
# fused fiber prox
# ---------------------------------------------------------------------------

def test_prox_fused_certified_against_bvls_dual():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(150):
        L = int(rng.integers(2, 13))
        l1 = float(rng.uniform(0.01, 2.0))
        l2 = float(rng.uniform(0.01, 2.0))
        v = rng.normal(0, 2.0, L)
        worst = max(worst, _certified_gap(v, l1, l2))
    assert worst <= 1e-10


def test_prox_fused_results_are_consistent():
    rng = np.random.default_rng(12)
    for _ in range(50):
        L = int(rng.integers(2, 10))
        l1, l2 = rng.uniform(0, 1.5, 2)
        v = rng.normal(0, 2.0, L)
        res = prox_fused(v, l1, l2)
        assert np.allclose(res.x, tv_denoise(v, l2))
        assert np.allclose(res.prox, soft_threshold(res.x, l1))
        assert np.allclose(res.z, np.cumsum(v - res.x)[:-1])
        assert np.abs(res.z).max(initial=0.0) <= l2 * (1 + 1e-12)


def test_prox_fused_degenerate_penalties():
    rng = np.random.default_rng(13)
    v = rng.normal(size=8)
    assert np.allclose(prox_fused(v, 0.7, 0.0).prox, soft_threshold(v, 0.7))
    assert np.allclose(prox_fused(v, 0.0, 0.4).prox, tv_denoise(v, 0.4))
    assert np.allclose(prox_fused(v, 0.0, 0.0).prox, v)


def test_prox_fused_nonexpansive():
    rng = np.random.default_rng(14)
    for _ in range(100):
        L = int(rng.integers(2, 12))
        l1, l2 = rng.uniform(0, 2.0, 2)
        u = rng.normal(0, 2, L)
        w = rng.normal(0, 2, L)
        du = prox_fused(u, l1, l2).prox - prox_fused(w, l1, l2).prox
        assert np.linalg.norm(du) <= np.linalg.norm(u - w) * (1 + 1e-12)


def test_prox_fused_validation():
    with pytest.raises(ValueError):
        prox_fused(np.array([1.0]), 0.1, 0.1)
    with pytest.raises(ValueError):
        prox_fused(np.array([1.0, 2.0]), -0.1, 0.1)
    with pytest.raises(ValueError):
        prox_fused(np.array([1.0, 2.0]), 0.1, -0.1)


# ---------------------------------------------------------------------------
# collection-level prox and penalty
# ---------------------------------------------------------------------------

def test_prox_fgl_matches_per_fiber_loop():
    rng = np.random.default_rng(15)
    L, p = 4, 7
    U = MatrixCollection(rng.normal(0, 2, (L, p, p)))
    l1, l2 = 0.3, 0.2
    P = prox_fgl(U, l1, l2)
    expect = np.array(U.arr, copy=True)
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            expect[:, i, j] = prox_fused(U.arr[:, i, j], l1, l2).prox
    assert np.allclose(P.arr, expect, atol=1e-13)
    assert np.allclose(P.arr, P.arr.transpose(0, 2, 1))
    # diagonals pass through untouched
    for l in range(L):
        assert np.array_equal(np.diag(P.arr[l]), np.diag(U.arr[l]))


def test_prox_fgl_zero_penalty_is_identity():
    rng = np.random.default_rng(16)
    U = MatrixCollection(rng.normal(size=(3, 5, 5)))
    assert np.allclose(prox_fgl(U, 0.0, 0.0).arr, U.arr)


def test_fgl_penalty_hand_value_and_loop_oracle():
    # L=2, p=2, single off-diagonal pair (0,1) counted in both triangles
    arr = np.zeros((2, 2, 2))
    arr[0] = [[1.0, 0.5], [0.5, 1.0]]
    arr[1] = [[1.0, -0.25], [-0.25, 2.0]]
    X = MatrixCollection(arr)
    l1, l2 = 2.0, 3.0
    # l1 * (|.5|+|.5|+|.25|+|.25|) + l2 * (|-.25-.5|*2) = 2*1.5 + 3*1.5
    assert abs(fgl_penalty(X, l1, l2) - (3.0 + 4.5)) < 1e-12

    rng = np.random.default_rng(17)
    Y = MatrixCollection(rng.normal(size=(5, 6, 6)))
    total = 0.0
    for l in range(5):
        for i in range(6):
            for j in range(6):
                if i != j:
                    total += l1 * abs(Y.arr[l, i, j])
                    if l >= 1:
                        total += l2 * abs(Y.arr[l, i, j] - Y.arr[l - 1, i, j])
    assert abs(fgl_penalty(Y, l1, l2) - total) < 1e-10 * (1 + total)


# ---------------------------------------------------------------------------
# log-det prox pair
# ---------------------------------------------------------------------------

def test_phi_pair_identities_and_stationarity():
    rng = np.random.default_rng(18)
    for _ in range(25):
        p = int(rng.integers(1, 30))
        beta = float(10 ** rng.uniform(-3, 2))
        A = rng.normal(0, rng.uniform(0.5, 5), (p, p))
        A = 0.5 * (A + A.T)
        F = sym_eig(A)
        Xp = phi_plus(F, beta)
        Xm = phi_minus(F, beta)
        scale = max(1.0, float(np.abs(A).max()), float(np.abs(Xp).max()))
        assert np.abs(Xp - Xm - A).max() <= 1e-8 * scale
        assert np.abs(Xp @ Xm - beta * np.eye(p)).max() <= 1e-8 * scale * max(1, beta)
        # phi_plus solves the prox stationarity -beta X^{-1} + X - A = 0
        resid = -beta * np.linalg.inv(Xp) + Xp - A
        assert np.abs(resid).max() <= 1e-8 * scale
        assert np.linalg.eigvalsh(Xp).min() > 0
        assert np.linalg.eigvalsh(Xm).min() > 0


def test_phi_pair_extreme_eigenvalues_stay_stable():
    # the two closed-form branches must not cancel catastrophically
    d = np.array([1e8, 5.0, 0.0, -5.0, -1e8])
    A = np.diag(d)
    F = sym_eig(A)
    beta = 0.5
    Xp = np.diag(phi_plus(F, beta))
    Xm = np.diag(phi_minus(F, beta))
    assert np.all(Xp > 0) and np.all(Xm > 0)
    assert np.allclose(Xp - Xm, np.sort(d)[::-1], rtol=1e-12)
    assert np.allclose(Xp * Xm, beta, rtol=1e-10)


def test_moreau_env_logdet_scalar_matches_numeric_min():
    for a, beta in [(2.0, 1.0), (-3.0, 0.5), (0.0, 2.0), (7.5, 0.1)]:
        F = sym_eig(np.array([[a]]))
        env = moreau_env_logdet(F, beta)
        res = minimize_scalar(
            lambda x: -beta * np.log(x) + 0.5 * (x - a) ** 2,
            bounds=(1e-9, abs(a) + 10 * beta + 10),
            method="bounded",
            options={"xatol": 1e-12},
        )
        assert abs(env - res.fun) < 1e-7 * (1 + abs(res.fun))


def test_moreau_env_logdet_is_a_lower_envelope():
    rng = np.random.default_rng(19)
    p, beta = 6, 0.8
    A = rng.normal(size=(p, p))
    A = 0.5 * (A + A.T)
    F = sym_eig(A)
    env = moreau_env_logdet(F, beta)
    # the envelope equals the inner objective at its minimizer ...
    Xp = phi_plus(F, beta)
    sgn, logdet = np.linalg.slogdet(Xp)
    at_min = -beta * logdet + 0.5 * np.sum((Xp - A) ** 2)
    assert sgn > 0 and abs(env - at_min) < 1e-8 * (1 + abs(env))
    # ... and is below the objective anywhere else
    for _ in range(20):
        Y = rng.normal(size=(p, p))
        Y = 0.5 * (Y + Y.T) + 3 * np.eye(p)
        if np.linalg.eigvalsh(Y).min() <= 0:
            continue
        sgn, logdet = np.linalg.slogdet(Y)
        assert env <= -beta * logdet + 0.5 * np.sum((Y - A) ** 2) + 1e-10


def test_moreau_env_fgl_identity_and_envelope():
    rng = np.random.default_rng(20)
    L, p = 3, 5
    U = MatrixCollection(rng.normal(0, 2, (L, p, p)))
    sigma, l1, l2 = 2.5, 0.4, 0.3
    P = prox_fgl(U, sigma * l1, sigma * l2)
    direct = sigma * fgl_penalty(P, l1, l2) + 0.5 * float(np.sum((P.arr - U.arr) ** 2))
    env = moreau_env_fgl(U, sigma, l1, l2)
    assert abs(env - direct) < 1e-10 * (1 + abs(direct))
    for _ in range(20):
        Y = MatrixCollection(U.arr + rng.normal(0, 0.5, (L, p, p)))
        other = sigma * fgl_penalty(Y, l1, l2) + 0.5 * float(np.sum((Y.arr - U.arr) ** 2))
        assert env <= other + 1e-10


def test_prox_scaling_homogeneity():
    # Prox of the sigma-scaled penalty equals sigma * Prox at (U / sigma)
    rng = np.random.default_rng(21)
    U = MatrixCollection(rng.normal(0, 3, (3, 6, 6)))
    sigma, l1, l2 = 4.0, 0.25, 0.15
    left = prox_fgl(U, sigma * l1, sigma * l2)
    right = sigma * prox_fgl(U / sigma, l1, l2)
    assert np.allclose(left.arr, right.arr, atol=1e-12)


# ---------------------------------------------------------------------------
# primal objective
# ---------------------------------------------------------------------------

def test_primal_objective_identity_case():
    L, p = 3, 6
    S = MatrixCollection.identity(L, p)
    data = ProblemData(S=S, lambda1=0.0, lambda2=0.0)
    # -log det I + <I, I> = p per matrix
    assert abs(primal_objective(MatrixCollection.identity(L, p), data) - L * p) < 1e-12


def test_primal_objective_includes_penalty_and_rejects_singular():
    rng = np.random.default_rng(22)
    L, p = 2, 4
    S = MatrixCollection.identity(L, p)
    arr = np.stack([np.eye(p) for _ in range(L)])
    arr[0, 0, 1] = arr[0, 1, 0] = 0.3
    Theta = MatrixCollection(arr)
    data0 = ProblemData(S=S, lambda1=0.0, lambda2=0.0)
    data1 = ProblemData(S=S, lambda1=1.0, lambda2=0.5)
    base = primal_objective(Theta, data0)
    with_pen = primal_objective(Theta, data1)
    assert abs(with_pen - base - fgl_penalty(Theta, 1.0, 0.5)) < 1e-12
    # singular Theta (zero eigenvalue) is outside the domain
    sing = np.stack([np.eye(p) for _ in range(L)])
    sing[1, 3, 3] = 0.0
    assert primal_objective(MatrixCollection(sing), data0) == np.inf


def test_problem_data_validation():
    S = MatrixCollection.identity(2, 3)
    with pytest.raises(ValueError):
        ProblemData(S=S, lambda1=-0.1, lambda2=0.0)
    with pytest.raises(ValueError):
        ProblemData(S=MatrixCollection.identity(1, 3), lambda1=0.1, lambda2=0.1)
    d = ProblemData(S=S, lambda1=0.1, lambda2=0.2)
    assert d.L == 2 and d.p == 3
