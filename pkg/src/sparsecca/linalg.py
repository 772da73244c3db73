"""Dense linear-algebra primitives: SVD, symmetric square roots, projections."""

from typing import NamedTuple

import numpy as np

from .errors import DegenerateInputError, NotPsdError, SolverFailureError

DEFAULT_TOL = 1e-10


class SvdResult(NamedTuple):
    """Thin SVD a = left @ diag(singular_values) @ right.T."""

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray


def svd(a):
    """Thin SVD with singular values sorted nonincreasing.

    Raises SolverFailureError if the underlying LAPACK routine does not
    converge.
    """
    a = np.asarray(a, dtype=float)
    if not np.isfinite(a).all():
        raise DegenerateInputError("matrix has non-finite entries")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SolverFailureError(f"SVD did not converge: {exc}") from exc
    return SvdResult(u, s, vt.T)


def _sym_eig(a, tol):
    """Eigendecomposition of the symmetrized input, with a PSD check.

    The input is replaced by (a + a') / 2 first; eigenvalues below
    -tol * max(|lambda|, 1) raise NotPsdError, smaller negatives are
    clamped to zero.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DegenerateInputError(f"expected a square matrix, got shape {a.shape}")
    sym = 0.5 * (a + a.T)
    w, q = np.linalg.eigh(sym)
    scale = max(abs(w[0]), abs(w[-1]), 1.0)
    if w[0] < -tol * scale:
        raise NotPsdError(f"smallest eigenvalue {w[0]:.3e} below -tol*scale")
    return np.clip(w, 0.0, None), q


def psd_sqrt(a, tol=DEFAULT_TOL):
    """Principal square root of a symmetric PSD matrix."""
    w, q = _sym_eig(a, tol)
    return (q * np.sqrt(w)) @ q.T


def psd_pinv_sqrt(a, tol=DEFAULT_TOL):
    """Principal square root of the pseudo-inverse of a symmetric PSD matrix.

    Eigenvalues above tol * lambda_max map to lambda^{-1/2}, the rest to 0.
    """
    w, q = _sym_eig(a, tol)
    cutoff = tol * max(w[-1], 0.0)
    inv = np.where(w > cutoff, 1.0 / np.sqrt(np.where(w > cutoff, w, 1.0)), 0.0)
    return (q * inv) @ q.T


def _orthonormal_basis(a, tol):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[-1] <= tol * max(s[0], 1e-300):
        raise DegenerateInputError("matrix does not have full column rank")
    return u


def subspace_dist_sq(a, b, tol=DEFAULT_TOL):
    """Squared Frobenius distance between column-space projectors.

    ||P_a - P_b||_F^2 for full-column-rank inputs with equal row counts.
    """
    qa = _orthonormal_basis(a, tol)
    qb = _orthonormal_basis(b, tol)
    if qa.shape[0] != qb.shape[0]:
        raise DegenerateInputError("row counts differ")
    cross = qa.T @ qb
    val = qa.shape[1] + qb.shape[1] - 2.0 * float(np.sum(cross * cross))
    return max(val, 0.0)


def save_matrix_csv(path, a):
    """Write a matrix as comma-separated rows, no header, 17 significant digits."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    np.savetxt(path, a, fmt="%.17g", delimiter=",")


def load_matrix_csv(path):
    """Read a matrix written by save_matrix_csv."""
    a = np.loadtxt(path, delimiter=",", ndmin=2)
    return np.asarray(a, dtype=float)
