"""Reconstruction and cross-method oracles for the 64-bit linear algebra."""

import numpy as np
import pytest

from paramnav.linalg import (SvdFactors, matrix_sqrt_psd, project_orthogonal,
                             svd_jacobi, sym_eig)


def _check_svd_invariants(a, f: SvdFactors, tol=1e-8):
    k = f.s.shape[0]
    assert np.abs(f.u.T @ f.u - np.eye(k)).max() <= 1e-8
    assert np.abs(f.v @ f.v.T - np.eye(k)).max() <= 1e-8
    assert np.all(np.diff(f.s) <= 1e-12)
    assert np.all(f.s >= 0)
    a = np.asarray(a, dtype=np.float64)
    res = np.linalg.norm(f.reconstruct() - a)
    assert res <= tol * max(1.0, np.linalg.norm(a))


def test_svd_diagonal():
    f = svd_jacobi(np.diag([3.0, 1.0]))
    assert np.allclose(f.s, [3.0, 1.0], atol=1e-12)
    _check_svd_invariants(np.diag([3.0, 1.0]), f)


def test_svd_rank_one():
    a = np.array([[0.0, 2.0], [0.0, 0.0]])
    f = svd_jacobi(a)
    assert np.allclose(f.s, [2.0, 0.0], atol=1e-12)
    _check_svd_invariants(a, f)


@pytest.mark.parametrize("shape,seed", [
    ((8, 72), 0), ((8, 72), 1), ((1, 72), 2), ((72, 1), 3),
    ((8, 144), 4), ((64, 256), 5), ((256, 64), 6), ((13, 13), 7),
    ((5, 3), 8), ((1, 1), 9),
])
def test_svd_random(shape, seed):
    a = np.random.default_rng(seed).standard_normal(shape)
    f = svd_jacobi(a)
    _check_svd_invariants(a, f)


def test_svd_cross_check_with_sym_eig():
    # singular values squared must equal the eigenvalues of A A^T
    a = np.random.default_rng(42).standard_normal((8, 72))
    f = svd_jacobi(a)
    lam, _ = sym_eig(a @ a.T)
    assert np.abs(np.sort(f.s ** 2) - np.sort(lam)).max() <= 1e-8 * max(1.0, lam.max())


def test_svd_zero_matrix():
    f = svd_jacobi(np.zeros((4, 3)))
    assert np.array_equal(f.s, np.zeros(3))
    _check_svd_invariants(np.zeros((4, 3)), f)


def test_svd_rejects_non_finite():
    with pytest.raises(ValueError):
        svd_jacobi(np.array([[1.0, np.inf]]))


def test_sym_eig_diagonal():
    lam, q = sym_eig(np.diag([4.0, 1.0]))
    assert np.allclose(lam, [4.0, 1.0])
    assert np.abs(q.T @ q - np.eye(2)).max() <= 1e-8


def test_sym_eig_analytic_2x2():
    m = np.array([[2.0, 1.0], [1.0, 2.0]])
    lam, q = sym_eig(m)
    assert np.allclose(lam, [3.0, 1.0], atol=1e-10)
    want0 = np.array([1.0, 1.0]) / np.sqrt(2.0)
    want1 = np.array([1.0, -1.0]) / np.sqrt(2.0)
    assert min(np.abs(q[:, 0] - want0).max(), np.abs(q[:, 0] + want0).max()) <= 1e-8
    assert min(np.abs(q[:, 1] - want1).max(), np.abs(q[:, 1] + want1).max()) <= 1e-8


@pytest.mark.parametrize("n,seed", [(50, 0), (50, 1), (7, 2), (64, 3)])
def test_sym_eig_random_reconstruction(n, seed):
    a = np.random.default_rng(seed).standard_normal((n, n))
    m = 0.5 * (a + a.T)
    lam, q = sym_eig(m)
    fro = np.linalg.norm(m)
    assert np.linalg.norm(m @ q - q * lam) <= 1e-8 * fro
    assert np.abs(q.T @ q - np.eye(n)).max() <= 1e-8
    assert np.all(np.diff(lam) <= 1e-12)


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(ValueError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_sqrt_identity_and_diag():
    assert np.allclose(matrix_sqrt_psd(np.eye(3)), np.eye(3), atol=1e-10)
    assert np.allclose(matrix_sqrt_psd(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_sqrt_random_psd(seed):
    a = np.random.default_rng(seed).standard_normal((20, 16))
    m = a.T @ a
    s = matrix_sqrt_psd(m)
    assert np.abs(s - s.T).max() == 0.0
    assert np.linalg.norm(s @ s - m) <= 1e-6 * max(1.0, np.linalg.norm(m))


def test_sqrt_rejects_negative():
    with pytest.raises(ValueError):
        matrix_sqrt_psd(np.diag([1.0, -1e-3]))


def test_project_simple():
    out = project_orthogonal(np.array([1.0, 1.0]), [np.array([1.0, 0.0])])
    assert np.allclose(out, [0.0, 1.0], atol=1e-12)


def test_project_already_orthogonal():
    v = np.array([0.0, 0.0, 2.5])
    basis = [np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])]
    assert np.allclose(project_orthogonal(v, basis), v, atol=1e-14)


def test_project_random_rank10_in_r72():
    rng = np.random.default_rng(3)
    basis = svd_jacobi(rng.standard_normal((10, 72))).v  # orthonormal rows
    v = rng.standard_normal(72)
    out = project_orthogonal(v, basis)
    inner = np.abs(basis @ out)
    assert inner.max() <= 1e-8 * np.linalg.norm(out)


def test_project_rejects_bad_basis():
    with pytest.raises(ValueError):
        project_orthogonal(np.ones(3), [np.array([1.0, 0.0, 0.0]),
                                        np.array([1.0, 0.0, 0.0])])
    with pytest.raises(ValueError):
        project_orthogonal(np.array([]), [np.array([1.0])])
