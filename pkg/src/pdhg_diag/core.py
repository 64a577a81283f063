"""Abstract PDHG engine.

The iteration map is

    x+ = prox_f(sigma, x - sigma * A^T y)
    y+ = prox_gstar(tau, y + tau * A (2 x+ - x))

and all convergence bookkeeping happens in the metric induced by the block
matrix M = [[I/sigma, -A^T], [-A, I/tau]], which is positive definite exactly
when sigma*tau*||A||^2 < 1.  Stopping and residuals use the M-norm, since the
iteration map is (firmly) nonexpansive in that metric, not the Euclidean one.
"""

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonFiniteIterate, StepSizeTooLarge
from .linalg import operator_norm_estimate

DEFAULT_MAX_ITER = 100_000
DEFAULT_RESIDUAL_TOL = 1e-9
DEFAULT_TRACE_DEPTH = 64


@dataclass(frozen=True)
class Iterate:
    """A primal-dual pair z = (x, y)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y)))


class SaddleProblem:
    """A PDHG instance: linear map A, two prox oracles, step sizes.

    Parameters
    ----------
    A : (dim_y, dim_x) array
        The coupling matrix.
    prox_f : callable(step, point) -> point in R^dim_x
        Proximal oracle for the primal function.
    prox_gstar : callable(step, point) -> point in R^dim_y
        Proximal oracle for the conjugate of the dual function.
    sigma, tau : positive floats, optional
        Step sizes; when omitted both default to 0.9/||A|| (so
        sigma*tau*||A||^2 ~= 0.81), or to 1.0 when A == 0.
    norm_A : float, optional
        Cached spectral-norm estimate; computed by power iteration when absent.

    The instance is immutable after construction and safe to share across
    threads; prox oracles must be re-entrant.
    """

    def __init__(self, A, prox_f, prox_gstar, sigma=None, tau=None, norm_A=None,
                 seed=0):
        self.A = np.ascontiguousarray(A, dtype=float)
        if self.A.ndim != 2:
            raise DimensionMismatch("A must be a matrix")
        self.dim_y, self.dim_x = self.A.shape
        self.prox_f = prox_f
        self.prox_gstar = prox_gstar
        if norm_A is None:
            norm_A = 0.0 if not np.any(self.A) else operator_norm_estimate(self.A, seed=seed)
        self.norm_A = float(norm_A)
        if sigma is None and tau is None:
            if self.norm_A == 0.0:
                sigma = tau = 1.0
            else:
                sigma = tau = 0.9 / self.norm_A
        elif sigma is None or tau is None:
            raise ValueError("provide both sigma and tau, or neither")
        self.sigma = float(sigma)
        self.tau = float(tau)


@dataclass(frozen=True)
class MetricM:
    """The PDHG metric M = [[I/sigma, -A^T], [-A, I/tau]]."""

    sigma: float
    tau: float
    A: np.ndarray
    norm_A: float

    @property
    def modulus(self):
        """Strong-monotonicity modulus min(1/sigma, 1/tau) * (1 - sqrt(sigma*tau)*||A||)."""
        return min(1.0 / self.sigma, 1.0 / self.tau) * (
            1.0 - np.sqrt(self.sigma * self.tau) * self.norm_A
        )

    def inner(self, u, w):
        """<u, M w>; symmetric in (u, w)."""
        if u.x.shape != w.x.shape or u.y.shape != w.y.shape:
            raise DimensionMismatch("m_inner: iterate shapes differ")
        return float(
            u.x @ w.x / self.sigma
            - u.x @ (self.A.T @ w.y)
            - u.y @ (self.A @ w.x)
            + u.y @ w.y / self.tau
        )

    def norm(self, u):
        return float(np.sqrt(max(self.inner(u, u), 0.0)))

    def dense(self):
        """Explicit dense M, for cross-checking the blockwise inner product."""
        n, m = self.A.shape[1], self.A.shape[0]
        M = np.zeros((n + m, n + m))
        M[:n, :n] = np.eye(n) / self.sigma
        M[:n, n:] = -self.A.T
        M[n:, :n] = -self.A
        M[n:, n:] = np.eye(m) / self.tau
        return M


def validate_steps(problem):
    """Check sigma*tau*||A||^2 < 1 and return the metric; raise StepSizeTooLarge."""
    if problem.sigma <= 0 or problem.tau <= 0:
        raise StepSizeTooLarge(float("nan"))
    product = problem.sigma * problem.tau * problem.norm_A ** 2
    if product >= 1.0:
        raise StepSizeTooLarge(product)
    return MetricM(problem.sigma, problem.tau, problem.A, problem.norm_A)


def m_inner(metric, u, w):
    """<u, M w> for iterates u, w."""
    return metric.inner(u, w)


def _step(problem, x, y):
    xn = problem.prox_f(problem.sigma, x - problem.sigma * (problem.A.T @ y))
    yn = problem.prox_gstar(problem.tau, y + problem.tau * (problem.A @ (2.0 * xn - x)))
    return xn, yn


def apply_T(problem, z):
    """One application of the PDHG map T."""
    xn, yn = _step(problem, z.x, z.y)
    return Iterate(xn, yn)


def apply_shifted_T(problem, v, z):
    """One application of v + T (the shifted map whose fixed points attract z_k + k v)."""
    xn, yn = _step(problem, z.x, z.y)
    return Iterate(v.x + xn, v.y + yn)


@dataclass
class IterateTrace:
    """History of a PDHG run.

    Scalars (norm_dx, norm_dy, resid_m, norm_z) are recorded for every
    iteration; difference vectors and full iterates only for the last
    ``trace_depth`` iterations (plus any pinned indices), so long diagnostic
    runs stay bounded in memory.  resid_m[k] is the fixed-point residual
    ||z_k - T z_k||_M.
    """

    sigma: float
    tau: float
    z0: Iterate = None
    z_final: Iterate = None
    iterations: int = 0
    stopped_on: str = "max_iter"
    norm_dx: list = field(default_factory=list)
    norm_dy: list = field(default_factory=list)
    resid_m: list = field(default_factory=list)
    norm_z: list = field(default_factory=list)
    differences: deque = None
    iterates: deque = None
    pinned: dict = field(default_factory=dict)

    def last_difference(self):
        if not self.differences:
            return None
        return self.differences[-1]

    @property
    def norm_z0(self):
        return float(np.sqrt(self.z0.x @ self.z0.x + self.z0.y @ self.z0.y))


def iterate(problem, z0, max_iter=DEFAULT_MAX_ITER, residual_tol=DEFAULT_RESIDUAL_TOL,
            trace_depth=DEFAULT_TRACE_DEPTH, pins=()):
    """Run z_{k+1} = T z_k and record a trace.

    Stops after ``max_iter`` iterations or as soon as the M-norm fixed-point
    residual ||z_k - z_{k+1}||_M drops to ``residual_tol``.  Raises
    NonFiniteIterate if the oracles produce NaN/Inf; with validated step sizes
    the iteration itself cannot blow up in finitely many steps.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    validate_steps(problem)
    if not z0.is_finite():
        raise NonFiniteIterate(0)
    pins = set(int(p) for p in pins)

    A = problem.A
    sigma, tau = problem.sigma, problem.tau
    trace = IterateTrace(sigma=sigma, tau=tau, z0=z0)
    trace.differences = deque(maxlen=max(trace_depth, 1))
    trace.iterates = deque(maxlen=max(trace_depth, 1) + 1)
    trace.iterates.append(z0)
    if 0 in pins:
        trace.pinned[0] = z0

    x, y = z0.x.copy(), z0.y.copy()
    stopped_on = "max_iter"
    k = 0
    for k in range(1, max_iter + 1):
        xn, yn = _step(problem, x, y)
        if not (np.all(np.isfinite(xn)) and np.all(np.isfinite(yn))):
            raise NonFiniteIterate(k)
        dx = x - xn
        dy = y - yn
        resid2 = dx @ dx / sigma - 2.0 * ((A @ dx) @ dy) + dy @ dy / tau
        resid = float(np.sqrt(max(resid2, 0.0)))
        trace.norm_dx.append(float(np.linalg.norm(dx)))
        trace.norm_dy.append(float(np.linalg.norm(dy)))
        trace.resid_m.append(resid)
        trace.norm_z.append(float(np.sqrt(xn @ xn + yn @ yn)))
        trace.differences.append((dx, dy))
        zk = Iterate(xn, yn)
        trace.iterates.append(zk)
        if k in pins:
            trace.pinned[k] = zk
        x, y = xn, yn
        if resid <= residual_tol:
            stopped_on = "residual"
            break
    trace.iterations = k
    trace.stopped_on = stopped_on
    trace.z_final = Iterate(x, y)
    return trace
