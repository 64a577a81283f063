"""Dense linear-algebra kernel: vectors, matrices, SPD factorization, norm estimation.

Vectors and matrices are plain float64 numpy arrays; the constructors here
validate shape and finiteness on the way in so solver state never carries
NaN/Inf.
"""

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotPositiveDefinite

SYMMETRY_TOL = 1e-10


def as_vector(data, dim=None):
    """Validate and return a finite 1-D float64 array."""
    v = np.asarray(data, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatch("expected a 1-D vector, got shape %s" % (v.shape,))
    if dim is not None and v.shape[0] != dim:
        raise DimensionMismatch("expected dim %d, got %d" % (dim, v.shape[0]))
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite entries")
    return v


def as_matrix(data, rows=None, cols=None):
    """Validate and return a finite 2-D float64 array (row-major)."""
    m = np.ascontiguousarray(data, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch("expected a 2-D matrix, got shape %s" % (m.shape,))
    if rows is not None and m.shape[0] != rows:
        raise DimensionMismatch("expected %d rows, got %d" % (rows, m.shape[0]))
    if cols is not None and m.shape[1] != cols:
        raise DimensionMismatch("expected %d cols, got %d" % (cols, m.shape[1]))
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    return m


def matvec(A, x):
    """Return A @ x with an explicit shape check."""
    A = np.asarray(A, dtype=float)
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise DimensionMismatch(
            "matvec: %s @ %s" % (A.shape, x.shape)
        )
    return A @ x


def matvec_transpose(A, y):
    """Return A.T @ y with an explicit shape check."""
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    if A.shape[0] != y.shape[0]:
        raise DimensionMismatch(
            "matvec_transpose: %s.T @ %s" % (A.shape, y.shape)
        )
    return A.T @ y


class SpdFactorization:
    """Cholesky factor L (lower triangular) of a symmetric positive definite matrix."""

    def __init__(self, lower):
        self.lower = np.asarray(lower, dtype=float)
        self.dim = self.lower.shape[0]

    def solve(self, r):
        r = np.asarray(r, dtype=float)
        if r.shape[0] != self.dim:
            raise DimensionMismatch(
                "spd_solve: factor dim %d, rhs dim %d" % (self.dim, r.shape[0])
            )
        z = scipy.linalg.solve_triangular(self.lower, r, lower=True)
        return scipy.linalg.solve_triangular(self.lower.T, z, lower=False)


def spd_factorize(mtx):
    """Cholesky-factorize a symmetric positive definite matrix.

    Symmetry is checked to absolute tolerance 1e-10 (file-format round trips
    can perturb the last digits); a failed pivot raises NotPositiveDefinite.
    """
    mtx = as_matrix(mtx)
    if mtx.shape[0] != mtx.shape[1]:
        raise DimensionMismatch("spd_factorize: matrix is not square")
    if mtx.size and np.max(np.abs(mtx - mtx.T)) > SYMMETRY_TOL:
        raise NotPositiveDefinite("matrix is not symmetric to tolerance 1e-10")
    try:
        lower = np.linalg.cholesky(mtx)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Cholesky failed: %s" % exc) from exc
    return SpdFactorization(lower)


def spd_solve(fact, r):
    """Solve (L L^T) s = r for the matrix behind ``fact``."""
    return fact.solve(r)


def operator_norm_estimate(A, seed=0, max_iter=200, rel_tol=1e-12):
    """Estimate the spectral norm ||A|| by power iteration on A^T A.

    The start vector is a seeded unit Gaussian, so the result is deterministic
    for a fixed seed.  (A fixed deterministic direction such as all-ones can be
    exactly orthogonal to the dominant singular vector and stall on the wrong
    eigenvalue.)  The returned value is inflated by 1+1e-6 so that downstream
    step-size checks sigma*tau*||A||^2 < 1 are conservative with respect to the
    true norm.  An all-zero matrix returns 0.
    """
    A = as_matrix(A)
    if A.size == 0:
        raise DimensionMismatch("operator_norm_estimate: empty matrix")
    if not np.any(A):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = A @ v
        v = A.T @ w
        nv = np.linalg.norm(v)
        if nv == 0.0:
            # start vector happened to lie in the kernel; re-draw
            v = rng.standard_normal(A.shape[1])
            v /= np.linalg.norm(v)
            continue
        v /= nv
        new_est = np.linalg.norm(A @ v)
        if est > 0.0 and abs(new_est - est) <= rel_tol * new_est:
            est = new_est
            break
        est = new_est
    return est * (1.0 + 1e-6)
