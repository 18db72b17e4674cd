import numpy as np
import pytest

from fglasso.jacobian import (
    NewtonOperator,
    fgl_jacobian,
    fused_jacobian,
    fused_jacobian_apply,
    newton_apply,
    phi_derivative_cache,
    phi_plus_dderiv,
)
from fglasso.linalg import MatrixCollection, collection_inner, sym_eig
from fglasso.prox import _prox_fgl_arr, phi_plus, prox_fused


def _diff_matrix(L):
    B = np.zeros((L - 1, L))
    for j in range(L - 1):
        B[j, j] = -1.0
        B[j, j + 1] = 1.0
    return B


def _pinv_oracle(v, l1, l2):
    """Dense Jacobian by the projection formula: Diag(ups) * (I - B'(S BB' S)^+ B)
    where S selects the difference indices at which the TV output is fused."""
    r = prox_fused(v, l1, l2)
    L = len(v)
    ups = np.ones(L) if l1 == 0 else (np.abs(r.x) > l1).astype(np.float64)
    B = _diff_matrix(L)
    S = np.diag((np.diff(r.x) == 0.0).astype(np.float64))
    Qhat = np.linalg.pinv(S @ B @ B.T @ S)
    return ups[:, None] * (np.eye(L) - B.T @ Qhat @ B)


# ---------------------------------------------------------------------------
# fiber Jacobian
# ---------------------------------------------------------------------------

def test_fused_jacobian_trivial_shapes():
    # distinct entries, no shrinkage kill: identity
    v = np.array([3.0, -2.0, 5.0, -4.0])
    J = fused_jacobian(v, 1.0, 0.0)
    assert J.blocks == ((0, 0), (1, 1), (2, 2), (3, 3))
    assert np.array_equal(J.upsilon, np.ones(4))
    assert np.allclose(J.as_dense(), np.eye(4))
    # full shrinkage: zero matrix
    J0 = fused_jacobian(v, float(np.abs(v).max()) + 2 * 0.5 + 1, 0.5)
    assert np.array_equal(J0.upsilon, np.zeros(4))
    assert np.allclose(J0.as_dense(), 0.0)


def test_upsilon_tie_and_zero_penalty_rules():
    # lambda2 = 0 keeps x = v, so the mask is read off v directly;
    # |x| exactly at the threshold resolves to 0
    l1 = 0.75
    v = np.array([l1, -l1, 2 * l1, 0.0])
    J = fused_jacobian(v, l1, 0.0)
    assert np.array_equal(J.upsilon, [0.0, 0.0, 1.0, 0.0])
    # at lambda1 = 0 the soft threshold is the identity: mask is all ones
    J0 = fused_jacobian(np.array([0.0, 0.0, 1.0]), 0.0, 0.0)
    assert np.array_equal(J0.upsilon, np.ones(3))


def test_fused_jacobian_matches_pinv_oracle():
    rng = np.random.default_rng(31)
    worst = 0.0
    for k in range(200):
        L = int(rng.integers(2, 7))
        l1 = 0.0 if k % 10 == 0 else float(rng.uniform(0, 2))
        l2 = 0.0 if k % 7 == 0 else float(rng.uniform(0, 2))
        v = rng.normal(0, rng.uniform(0.3, 3.0), L)
        M = fused_jacobian(v, l1, l2).as_dense()
        worst = max(worst, float(np.abs(M - _pinv_oracle(v, l1, l2)).max()))
    assert worst <= 1e-10


def test_fused_jacobian_block_invariants():
    rng = np.random.default_rng(32)
    for _ in range(60):
        L = int(rng.integers(2, 9))
        v = rng.normal(0, 1.5, L)
        J = fused_jacobian(v, float(rng.uniform(0, 1)), float(rng.uniform(0, 1)))
        # disjoint consecutive cover of 0..L-1
        flat = [t for s, e in J.blocks for t in range(s, e + 1)]
        assert flat == list(range(L))
        # mask constant within each block
        for s, e in J.blocks:
            assert np.all(J.upsilon[s : e + 1] == J.upsilon[s])
        # dense element is symmetric PSD with spectrum in [0, 1]
        M = J.as_dense()
        assert np.allclose(M, M.T)
        w = np.linalg.eigvalsh(M)
        assert w.min() >= -1e-12 and w.max() <= 1 + 1e-12


def test_fused_jacobian_apply_matches_dense():
    rng = np.random.default_rng(33)
    for _ in range(60):
        L = int(rng.integers(2, 9))
        v = rng.normal(0, 2, L)
        J = fused_jacobian(v, float(rng.uniform(0, 1.5)), float(rng.uniform(0, 1.5)))
        w = rng.normal(size=L)
        assert np.allclose(fused_jacobian_apply(J, w), J.as_dense() @ w, atol=1e-13)
    with pytest.raises(ValueError):
        fused_jacobian_apply(fused_jacobian(np.array([1.0, 2.0]), 0.1, 0.1), np.ones(3))


def test_fused_jacobian_is_exact_local_linearization():
    # the prox is piecewise affine, so whenever v and v + dv produce the same
    # block/mask pattern the Jacobian reproduces the increment exactly
    rng = np.random.default_rng(34)
    checked = 0
    for _ in range(100):
        L = 6
        l1, l2 = rng.uniform(0.05, 1.0, 2)
        v = rng.normal(0, 2, L)
        J = fused_jacobian(v, l1, l2)
        base = prox_fused(v, l1, l2).prox
        for scale in (3e-2, 1e-2, 3e-3, 1e-3):
            dv = scale * rng.normal(size=L)
            J2 = fused_jacobian(v + dv, l1, l2)
            if J2.blocks == J.blocks and np.array_equal(J2.upsilon, J.upsilon):
                inc = prox_fused(v + dv, l1, l2).prox - base
                err = np.linalg.norm(inc - J.as_dense() @ dv)
                assert err <= 1e-12 * np.linalg.norm(dv)
                checked += 1
                break
    assert checked >= 90


def test_fused_jacobian_validation():
    with pytest.raises(ValueError):
        fused_jacobian(np.array([1.0, 2.0]), -0.1, 0.1)


# ---------------------------------------------------------------------------
# derivative of the log-det prox branch
# ---------------------------------------------------------------------------

def _random_sym(rng, p, scale=1.0):
    A = rng.normal(0, scale, (p, p))
    return 0.5 * (A + A.T)


def test_gamma_table_bounds_and_symmetry():
    rng = np.random.default_rng(35)
    for _ in range(20):
        p = int(rng.integers(1, 25))
        beta = float(10 ** rng.uniform(-3, 2))
        C = phi_derivative_cache(sym_eig(_random_sym(rng, p, 3.0)), beta)
        assert np.allclose(C.gamma, C.gamma.T)
        assert np.all(C.gamma > 0) and np.all(C.gamma < 1)
    with pytest.raises(ValueError):
        phi_derivative_cache(sym_eig(np.eye(2)), 0.0)


def test_phi_plus_dderiv_matches_finite_differences():
    rng = np.random.default_rng(36)
    p, beta = 8, 0.7
    A = _random_sym(rng, p, 2.0)
    C = phi_derivative_cache(sym_eig(A), beta)
    for _ in range(5):
        B = _random_sym(rng, p)
        D = phi_plus_dderiv(C, B)
        for t in (1e-4, 1e-5, 1e-6):
            fd = (phi_plus(sym_eig(A + t * B), beta) - phi_plus(sym_eig(A - t * B), beta)) / (2 * t)
            err = float(np.abs(fd - D).max())
            # first-order accuracy; round-off eps/t caps how small err can go
            assert err <= 10.0 * t * max(1.0, float(np.abs(B).max()) ** 2)


def test_phi_plus_dderiv_self_adjoint_and_psd():
    rng = np.random.default_rng(37)
    p, beta = 10, 1.3
    C = phi_derivative_cache(sym_eig(_random_sym(rng, p, 2.0)), beta)
    for _ in range(10):
        B1 = _random_sym(rng, p)
        B2 = _random_sym(rng, p)
        lhs = float(np.sum(phi_plus_dderiv(C, B1) * B2))
        rhs = float(np.sum(B1 * phi_plus_dderiv(C, B2)))
        assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))
        quad = float(np.sum(B1 * phi_plus_dderiv(C, B1)))
        assert quad >= -1e-12
    with pytest.raises(ValueError):
        phi_plus_dderiv(C, np.eye(p + 1))


# ---------------------------------------------------------------------------
# collection Jacobian table
# ---------------------------------------------------------------------------

def test_fgl_jacobian_fibers_match_single_fiber_construction():
    rng = np.random.default_rng(38)
    L, p, sigma, l1, l2 = 5, 6, 2.0, 0.3, 0.2
    U = MatrixCollection(rng.normal(0, 2, (L, p, p)))
    tab = fgl_jacobian(U, sigma, l1, l2)
    for i in range(p):
        for j in range(i + 1, p):
            ref = fused_jacobian(U.arr[:, i, j], sigma * l1, sigma * l2)
            got = tab.fiber(i, j)
            assert got.blocks == ref.blocks
            assert np.array_equal(got.upsilon, ref.upsilon)
    with pytest.raises(IndexError):
        tab.fiber(3, 3)
    with pytest.raises(IndexError):
        tab.fiber(4, 2)
    with pytest.raises(ValueError):
        fgl_jacobian(U, 0.0, l1, l2)


def test_fgl_jacobian_apply_matches_dense_loop():
    rng = np.random.default_rng(39)
    L, p, sigma, l1, l2 = 4, 5, 1.5, 0.4, 0.25
    U = MatrixCollection(rng.normal(0, 2, (L, p, p)))
    tab = fgl_jacobian(U, sigma, l1, l2)
    D = MatrixCollection(rng.normal(size=(L, p, p)))
    out = tab.apply_arr(D.arr)
    expect = D.arr.copy()
    for i in range(p):
        for j in range(i + 1, p):
            Mij = tab.fiber(i, j).as_dense() @ D.arr[:, i, j]
            expect[:, i, j] = Mij
            expect[:, j, i] = Mij
    assert np.allclose(out, expect, atol=1e-13)
    # diagonal fibers pass through
    for l in range(L):
        assert np.array_equal(np.diag(out[l]), np.diag(D.arr[l]))
    via_collection = tab.apply(D)
    assert np.allclose(via_collection.arr, out)


def test_fgl_jacobian_is_directional_derivative_of_prox():
    rng = np.random.default_rng(40)
    L, p, sigma, l1, l2 = 3, 6, 2.5, 0.3, 0.2
    U = MatrixCollection(rng.normal(0, 2, (L, p, p)))
    tab = fgl_jacobian(U, sigma, l1, l2)
    t = 1e-7
    for _ in range(5):
        D = MatrixCollection(rng.normal(size=(L, p, p)))
        plus, _ = _prox_fgl_arr(U.arr + t * D.arr, sigma * l1, sigma * l2)
        minus, _ = _prox_fgl_arr(U.arr - t * D.arr, sigma * l1, sigma * l2)
        fd = (plus - minus) / (2 * t)
        assert np.abs(fd - tab.apply_arr(D.arr)).max() <= 1e-6


# ---------------------------------------------------------------------------
# Newton operator
# ---------------------------------------------------------------------------

def _operator_fixture(seed, L=3, p=5, sigma=1.7):
    rng = np.random.default_rng(seed)
    U = MatrixCollection(rng.normal(0, 2, (L, p, p)))
    tab = fgl_jacobian(U, sigma, 0.3, 0.2)
    caches = tuple(
        phi_derivative_cache(sym_eig(_random_sym(rng, p, 2.0)), sigma) for _ in range(L)
    )
    return NewtonOperator(tab, caches, sigma), rng, L, p, sigma


def test_newton_operator_matches_manual_assembly():
    N, rng, L, p, sigma = _operator_fixture(41)
    D = MatrixCollection(rng.normal(size=(L, p, p)))
    manual = (
        -sigma * N.fgl_jac.apply_arr(D.arr)
        - sigma * np.stack([phi_plus_dderiv(N.phi_caches[l], D.arr[l]) for l in range(L)])
        - D.arr / sigma
    )
    assert np.allclose(N.apply_arr(D.arr), manual, atol=1e-12)


def test_newton_operator_self_adjoint_negative_definite():
    N, rng, L, p, sigma = _operator_fixture(42)
    for _ in range(10):
        D = MatrixCollection(rng.normal(size=(L, p, p)))
        E = MatrixCollection(rng.normal(size=(L, p, p)))
        ND = newton_apply(N, D)
        NE = newton_apply(N, E)
        lhs = collection_inner(ND, E)
        rhs = collection_inner(D, NE)
        assert abs(lhs - rhs) <= 1e-8 * (1 + abs(lhs))
        quad = collection_inner(D, ND)
        assert quad <= -(1.0 / sigma) * collection_inner(D, D) + 1e-10


def test_newton_operator_validation():
    N, rng, L, p, sigma = _operator_fixture(43)
    with pytest.raises(ValueError):
        newton_apply(N, MatrixCollection.identity(L, p + 1))
    with pytest.raises(ValueError):
        NewtonOperator(N.fgl_jac, N.phi_caches, 0.0)
