import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from nhph.linalg import (
    DegenerateEigenvalueError,
    SingularMatrixError,
    condition_number,
    dominant_eigenpair,
    eig_full,
    orthonormal_complement,
    orthonormal_range,
    rank_tol,
    solve_or_invert,
    svd,
)
from nhph.mps import StatePair, transfer_matrix


def gauss_jordan_inverse(a):
    """Reference inverse by Gauss-Jordan elimination with full pivoting."""
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    aug = np.hstack([a, np.eye(n, dtype=complex)])
    col_perm = list(range(n))
    for c in range(n):
        sub = np.abs(aug[c:, c:n])
        r, q = np.unravel_index(np.argmax(sub), sub.shape)
        r += c
        q += c
        aug[[c, r]] = aug[[r, c]]
        aug[:, [c, q]] = aug[:, [q, c]]
        col_perm[c], col_perm[q] = col_perm[q], col_perm[c]
        aug[c] /= aug[c, c]
        for i in range(n):
            if i != c:
                aug[i] -= aug[i, c] * aug[c]
    inv = np.empty((n, n), dtype=complex)
    inv[col_perm] = aug[:, n:]
    return inv


def charpoly_roots(m):
    return np.roots(np.poly(m))


def aklt_e(mu):
    pair = StatePair.asymmetric_aklt(mu)
    return transfer_matrix(pair.left, pair.right).matrix


def multiset_close(a, b, atol):
    a = np.asarray(a, dtype=complex)
    b = list(np.asarray(b, dtype=complex))
    for x in a:
        j = int(np.argmin([abs(x - y) for y in b]))
        if abs(x - b[j]) > atol:
            return False
        b.pop(j)
    return not b


def test_eig_full_aklt_mu1():
    dec = eig_full(aklt_e(1.0))
    assert multiset_close(dec.eigenvalues, [0.5, 0.5, 0.5, -1.5], 1e-12)
    assert dec.eigenvalues[0] == pytest.approx(-1.5)


def test_eig_full_mu02_matches_characteristic_polynomial():
    e = aklt_e(0.2)
    dec = eig_full(e)
    frozen = [0.5, 0.1, -0.3, 0.02]
    assert multiset_close(dec.eigenvalues, frozen, 1e-12)
    assert multiset_close(charpoly_roots(e), frozen, 1e-10)


def test_eig_full_identity():
    dec = eig_full(np.eye(4))
    assert_allclose(dec.eigenvalues, np.ones(4))


def test_eig_full_sort_real():
    dec = eig_full(np.diag([3.0, -1.0, 2.0 + 1j, 2.0 - 0.5j]), sort="real")
    assert_allclose(dec.eigenvalues, [-1.0, 2.0 - 0.5j, 2.0 + 1j, 3.0])


def test_eig_full_left_right_vectors():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    dec = eig_full(a)
    assert_allclose(a @ dec.right_vectors, dec.right_vectors * dec.eigenvalues, atol=1e-10)
    lh = dec.left_vectors.conj().T
    assert_allclose(lh @ a, dec.eigenvalues[:, None] * lh, atol=1e-10)


def test_eig_full_rejects_bad_input():
    with pytest.raises(ValueError):
        eig_full(np.ones((2, 3)))
    with pytest.raises(ValueError):
        eig_full(np.array([[np.nan, 0], [0, 1]]))


def test_dominant_eigenpair_mu1():
    lam, r, l = dominant_eigenpair(aklt_e(1.0))
    assert lam == pytest.approx(-1.5)
    expected = np.array([0, -1, 1, 0]) / np.sqrt(2)
    assert abs(abs(np.vdot(expected, r)) - np.linalg.norm(r)) < 1e-12
    assert np.vdot(l, r) == pytest.approx(1.0)


@pytest.mark.parametrize("delta", [1e-12, -1e-12])
def test_dominant_eigenpair_degenerate_at_one_third(delta):
    with pytest.raises(DegenerateEigenvalueError):
        dominant_eigenpair(aklt_e(1 / 3 + delta))


def test_dominant_eigenpair_nearby_ok():
    lam, _, _ = dominant_eigenpair(aklt_e(1 / 3 + 1e-3))
    assert abs(lam) == pytest.approx(0.5 * (1 + 3e-3), rel=1e-9)


def test_solve_matches_gauss_jordan():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    assert_allclose(solve_or_invert(a), gauss_jordan_inverse(a), atol=1e-10)
    b = rng.normal(size=(5, 2))
    assert_allclose(solve_or_invert(a, b), gauss_jordan_inverse(a) @ b, atol=1e-10)


def test_solve_identity():
    assert_allclose(solve_or_invert(np.eye(3)), np.eye(3))


def test_solve_singular_raises():
    with pytest.raises(SingularMatrixError):
        solve_or_invert(np.diag([1.0, 0.0, 0.0, 0.0]))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_solve_roundtrip_property(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) + 3 * np.eye(n)
    x = solve_or_invert(a)
    assert_allclose(a @ x, np.eye(n), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_svd_reconstructs(m, n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
    u, s, vh = svd(a)
    assert np.all(np.diff(s) <= 1e-14)
    assert_allclose((u * s) @ vh, a, atol=1e-12)


def test_rank_and_condition():
    a = np.outer([1, 2, 3], [1, 1j, 0])
    assert rank_tol(a) == 1
    assert condition_number(a) == np.inf or condition_number(a) > 1e15
    assert condition_number(np.diag([2.0, 1.0])) == pytest.approx(2.0)


def test_range_and_complement_are_orthogonal():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(6, 2)) @ rng.normal(size=(2, 4))
    r = orthonormal_range(a)
    c = orthonormal_complement(a)
    assert r.shape[1] == 2 and c.shape[1] == 4
    assert_allclose(r.conj().T @ c, 0, atol=1e-12)
    assert_allclose(c.conj().T @ a, 0, atol=1e-12)
