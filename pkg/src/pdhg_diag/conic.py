"""Standard conic primal form:  min <c, x>  s.t.  A x = b,  x in C.

The dual update never projects (the constraint cone is {0}, whose polar is
the whole space), so the iteration is

    x+ = P_C(x - sigma * A^T y - sigma * c)
    y+ = y + tau * A (2 x+ - x) - tau * b.

When ker A and C meet only at the origin and c = 0 the displacement vector
has a zero primal block, the primal iterates converge to a point x_bar in C
with A x_bar = b - v_D / tau, and v itself is attained in ran(Id - T); this
is the regime the ellipsoid front-end relies on.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import cones, diagnostics
from .core import Iterate, SaddleProblem, iterate, validate_steps
from .errors import DimensionMismatch
from .linalg import as_matrix, as_vector, operator_norm_estimate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConicPrimalProblem:
    C: cones.Cone
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", as_matrix(self.A))
        m, n = self.A.shape
        object.__setattr__(self, "b", as_vector(self.b, m))
        object.__setattr__(self, "c", as_vector(self.c, n))
        if self.C.dim != n:
            raise DimensionMismatch(
                "cone dim %d != column count %d" % (self.C.dim, n)
            )

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.A.shape[0]


def build_saddle_conic(cp, sigma=None, tau=None, seed=0):
    """Specialize the PDHG engine: primal prox projects onto C, dual prox only shifts."""

    def prox_f(s, r):
        return cones.project(cp.C, r - s * cp.c)

    def prox_gstar(t, p):
        return p - t * cp.b

    norm_A = 0.0 if not np.any(cp.A) else operator_norm_estimate(cp.A, seed=seed)
    return SaddleProblem(cp.A, prox_f, prox_gstar, sigma=sigma, tau=tau,
                         norm_A=norm_A, seed=seed)


def sample_cone_points(C, count, seed, unit=True):
    """Seeded quasi-uniform points of C: Gaussian directions projected onto the cone."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < count:
        z = cones.project(C, rng.standard_normal(C.dim))
        nz = np.linalg.norm(z)
        if nz < 1e-12:
            pts.append(np.zeros(C.dim))
            continue
        pts.append(z / nz if unit else z)
    return pts


def check_kernel_condition(cp, tol=1e-8, starts=50, steps=500, seed=0):
    """Numerically decide whether ker A and C intersect only at the origin.

    Minimizes ||A x|| over unit vectors of C by projected gradient descent
    (step 1/||A||^2) from ``starts`` seeded starting points; returns False as
    soon as a unit cone vector with ||A x|| <= tol is found.  This is a
    heuristic: it can only certify failure, never prove the condition.
    """
    rng = np.random.default_rng(seed)
    nrm = np.linalg.norm(cp.A, 2)
    if nrm == 0.0:
        # kernel is everything: condition holds iff C contains no unit vector
        for _ in range(starts):
            z = cones.project(cp.C, rng.standard_normal(cp.C.dim))
            if np.linalg.norm(z) > tol:
                return False
        return True
    eta = 1.0 / nrm ** 2
    A = cp.A
    for _ in range(starts):
        x = cones.project(cp.C, rng.standard_normal(cp.C.dim))
        nx = np.linalg.norm(x)
        if nx < 1e-14:
            continue
        x /= nx
        for _ in range(steps):
            x = cones.project(cp.C, x - eta * (A.T @ (A @ x)))
            nx = np.linalg.norm(x)
            if nx < 1e-14:
                break
            x /= nx
            if np.linalg.norm(A @ x) <= tol:
                return False
    return True


@dataclass(frozen=True)
class ConicDisplacementReport:
    residuals: dict
    passed: bool

    def worst(self):
        return max(self.residuals.values())


def check_conic_displacement(cp, sigma, tau, v, tol, samples=1000, seed=0,
                             kernel_condition=None, x_bar=None):
    """Residuals of the displacement identities for the standard conic form.

    Always checked: v_R in -C; the Moreau split of -v_R + sigma*A^T v_D into
    sigma*A^T v_D (polar part) and -v_R (cone part); v_D in the polar of the
    image cone A(C), verified against seeded sample points of C since that
    polar has no closed form in general.

    When the kernel condition holds (passed in, or decided here when None),
    additionally: <b, v_D> = ||v_D||^2 / tau, and the variational inequality
    <v_D, v_D/tau - (b - A x)> <= 0 over the sampled x in C, which together
    pin v_D/tau down as the projection of the origin onto b - A(C).  With a
    converged primal point ``x_bar``, its complementarity <A x_bar, v_D> = 0
    and the shifted equation A x_bar = b - v_D/tau are included.
    """
    vR, vD = v.v_primal, v.v_dual
    u = -vR + sigma * (cp.A.T @ vD)
    residuals = {
        "primal_in_neg_cone": cones.membership(cp.C, -vR, tol).distance,
        "polar_projection": float(
            np.linalg.norm(sigma * (cp.A.T @ vD) - cones.project_polar(cp.C, u))
        ),
        "cone_projection": float(np.linalg.norm(-vR - cones.project(cp.C, u))),
    }
    pts = sample_cone_points(cp.C, samples, seed)
    residuals["image_polar"] = float(
        max((cp.A @ x) @ vD for x in pts)
    )
    if kernel_condition is None:
        kernel_condition = check_kernel_condition(cp)
    if kernel_condition:
        residuals["b_inner_identity"] = float(abs(cp.b @ vD - vD @ vD / tau))
        residuals["range_vi"] = float(
            max(vD @ (vD / tau - (cp.b - cp.A @ x)) for x in pts)
        )
    if x_bar is not None:
        residuals["xbar_complementarity"] = float(abs((cp.A @ x_bar) @ vD))
        residuals["xbar_shifted_equation"] = float(
            np.linalg.norm(cp.A @ x_bar - (cp.b - vD / tau))
        )
    return ConicDisplacementReport(
        residuals=residuals, passed=all(r <= tol for r in residuals.values())
    )


@dataclass(frozen=True)
class ConicSolveResult:
    x_bar: np.ndarray
    v: diagnostics.DisplacementEstimate
    trace: object
    metric: object
    converged: bool
    kernel_condition: bool


def solve_conic_with_limit(cp, sigma=None, tau=None, z0=None, max_iter=100_000,
                           residual_tol=1e-9, seed=0, estimate_window=10,
                           check_kernel=True):
    """Run PDHG and return the primal limit together with the displacement estimate.

    Under the kernel condition with c = 0 the primal sequence converges even
    when the instance is infeasible, and the limit satisfies the shifted
    equation A x_bar = b - v_D / tau.  ``converged`` reports whether the
    fixed-point residual reached ``residual_tol``; infeasible instances never
    converge in that sense but their difference sequence still stabilizes, so
    the partial results remain meaningful.
    """
    kernel_ok = check_kernel_condition(cp, seed=seed) if check_kernel else True
    if not kernel_ok:
        log.warning(
            "ker A meets the cone away from the origin (or c != 0): the primal "
            "limit and attained-displacement guarantees do not apply"
        )
    problem = build_saddle_conic(cp, sigma=sigma, tau=tau, seed=seed)
    metric = validate_steps(problem)
    if z0 is None:
        z0 = Iterate(np.zeros(cp.n), np.zeros(cp.m))
    trace = iterate(problem, z0, max_iter=max_iter, residual_tol=residual_tol,
                    trace_depth=max(64, estimate_window))
    window = min(estimate_window, len(trace.differences))
    v = diagnostics.estimate_displacement(
        trace, metric, method=diagnostics.AVERAGED_DIFFERENCES, window=max(window, 1)
    )
    return ConicSolveResult(
        x_bar=trace.z_final.x.copy(),
        v=v,
        trace=trace,
        metric=metric,
        converged=trace.stopped_on == "residual",
        kernel_condition=kernel_ok,
    )
