"""64-bit numerical linear algebra: Jacobi SVD, symmetric eigendecomposition,
PSD matrix square root, and projection onto an orthogonal complement.

Everything here takes and returns plain numpy arrays and promotes to float64
internally regardless of input dtype; the autodiff engine stays 32-bit.
"""

from dataclasses import dataclass

import numpy as np

MAX_SWEEPS = 100
_PAIR_TOL = 1e-12  # relative off-diagonal threshold per column pair


class ConvergenceError(RuntimeError):
    """Jacobi iteration failed to converge within the sweep cap."""


@dataclass
class SvdFactors:
    """Thin SVD A = u @ diag(s) @ v with u column- and v row-orthonormal."""

    u: np.ndarray  # (m, k)
    s: np.ndarray  # (k,), non-increasing, >= 0
    v: np.ndarray  # (k, n)

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v


def _check_finite(a, name):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")


def _jacobi_onesided(a: np.ndarray):
    """Orthogonalize the columns of ``a`` (m >= n) by plane rotations.

    Returns (b, v) with b = a @ v, v orthogonal, and the columns of b
    mutually orthogonal to relative tolerance _PAIR_TOL.
    """
    b = a.astype(np.float64).copy()
    n = b.shape[1]
    v = np.eye(n)
    for _ in range(MAX_SWEEPS):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                bi, bj = b[:, i], b[:, j]
                gii = bi @ bi
                gjj = bj @ bj
                gij = bi @ bj
                if abs(gij) <= _PAIR_TOL * np.sqrt(gii * gjj):
                    continue
                rotated = True
                zeta = (gjj - gii) / (2.0 * gij)
                t = np.sign(zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                if zeta == 0.0:
                    t = 1.0
                cs = 1.0 / np.hypot(1.0, t)
                sn = cs * t
                b[:, i], b[:, j] = cs * bi - sn * bj, sn * bi + cs * bj
                vi, vj = v[:, i].copy(), v[:, j]
                v[:, i], v[:, j] = cs * vi - sn * vj, sn * vi + cs * vj
        if not rotated:
            return b, v
    raise ConvergenceError(f"one-sided Jacobi did not converge in {MAX_SWEEPS} sweeps")


def _complete_orthonormal(u: np.ndarray, start: int) -> None:
    """Fill columns of ``u`` from ``start`` on with an orthonormal completion."""
    m = u.shape[0]
    col = start
    for cand in range(m):
        if col >= u.shape[1]:
            break
        e = np.zeros(m)
        e[cand] = 1.0
        for _ in range(2):
            e -= u[:, :col] @ (u[:, :col].T @ e)
        nrm = np.linalg.norm(e)
        if nrm > 0.5:
            u[:, col] = e / nrm
            col += 1
    if col < u.shape[1]:
        raise ConvergenceError("failed to complete orthonormal basis")


def svd_jacobi(a: np.ndarray) -> SvdFactors:
    """Thin SVD by one-sided Jacobi, computed in float64.

    Singular values come back sorted non-increasing; columns of ``u`` for
    zero singular values are filled with a deterministic orthonormal
    completion so u stays column-orthonormal for rank-deficient input.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"svd_jacobi needs a 2-D matrix, got shape {a.shape}")
    _check_finite(a, "svd_jacobi input")

    transposed = a.shape[0] < a.shape[1]
    work = a.T if transposed else a
    b, vj = _jacobi_onesided(work)

    s = np.linalg.norm(b, axis=0)
    order = np.argsort(-s, kind="stable")
    s = s[order]
    b = b[:, order]
    vj = vj[:, order]

    k = s.shape[0]
    u = np.zeros((work.shape[0], k))
    tol = s[0] * np.finfo(np.float64).eps * max(work.shape)
    cut = k
    for i in range(k):
        if s[i] > tol:
            u[:, i] = b[:, i] / s[i]
        else:
            s[i] = 0.0
            cut = min(cut, i)
    if cut < k:
        _complete_orthonormal(u, cut)

    if transposed:
        return SvdFactors(u=vj, s=s, v=u.T)
    return SvdFactors(u=u, s=s, v=vj.T)


def sym_eig(m: np.ndarray):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues sorted non-increasing, orthonormal eigenvector
    columns).  Input must be symmetric to 1e-8 relative in max norm.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"sym_eig needs a square matrix, got shape {m.shape}")
    _check_finite(m, "sym_eig input")
    mx = np.abs(m).max()
    if mx > 0 and np.abs(m - m.T).max() > 1e-8 * mx:
        raise ValueError("sym_eig input is not symmetric")

    a = 0.5 * (m + m.T)
    n = a.shape[0]
    q = np.eye(n)
    if n == 1:
        return a[0].copy(), q
    fro = np.linalg.norm(a)
    if fro == 0.0:
        return np.zeros(n), q
    thresh = 1e-13 * fro

    for _ in range(MAX_SWEEPS):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                aij = a[i, j]
                if abs(aij) <= thresh:
                    continue
                rotated = True
                zeta = (a[j, j] - a[i, i]) / (2.0 * aij)
                t = np.sign(zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                if zeta == 0.0:
                    t = 1.0
                cs = 1.0 / np.hypot(1.0, t)
                sn = cs * t
                ri, rj = a[i, :].copy(), a[j, :].copy()
                a[i, :] = cs * ri - sn * rj
                a[j, :] = sn * ri + cs * rj
                ci, cj = a[:, i].copy(), a[:, j]
                a[:, i] = cs * ci - sn * cj
                a[:, j] = sn * ci + cs * cj
                qi, qj = q[:, i].copy(), q[:, j]
                q[:, i] = cs * qi - sn * qj
                q[:, j] = sn * qi + cs * qj
        if not rotated:
            break
    else:
        raise ConvergenceError(f"Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps")

    lam = np.diag(a).copy()
    order = np.argsort(-lam, kind="stable")
    return lam[order], q[:, order]


def matrix_sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via sym_eig; eigenvalues in [-1e-6, 0) clamp to 0."""
    lam, q = sym_eig(m)
    if lam.min() < -1e-6:
        raise ValueError(f"matrix_sqrt_psd: materially negative eigenvalue {lam.min():.3e}")
    root = q @ (np.sqrt(np.clip(lam, 0.0, None))[:, None] * q.T)
    return 0.5 * (root + root.T)


def project_orthogonal(v: np.ndarray, basis) -> np.ndarray:
    """Remove from ``v`` its components along the orthonormal ``basis`` rows.

    ``basis`` is a (k, n) array or list of 1-D vectors, pairwise orthonormal
    within 1e-6.  Two Gram-Schmidt passes keep residual inner products at
    the 1e-8 * ||v'|| level.  A (near-)zero result signals a degenerate
    direction; the caller is expected to restart from a fresh random vector.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("project_orthogonal: empty vector")
    b = np.atleast_2d(np.asarray(basis, dtype=np.float64))
    if b.size == 0:
        return v.copy()
    if b.shape[1] != v.shape[0]:
        raise ValueError(f"basis dim {b.shape[1]} vs vector dim {v.shape[0]}")
    gram = b @ b.T
    if np.abs(gram - np.eye(b.shape[0])).max() > 1e-6:
        raise ValueError("project_orthogonal: basis is not orthonormal within 1e-6")
    out = v.copy()
    for _ in range(2):
        out -= b.T @ (b @ out)
    return out
