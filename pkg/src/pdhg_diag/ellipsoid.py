"""Ellipsoid separation via the standard conic primal form.

Given two families of ellipsoids E_i = {x : ||shape_i^{-1}(x - center_i)|| <= 1},
deciding whether their convex hulls intersect is a second-order-cone
feasibility problem in the rescaled variables (lambda_i, p_i) and (mu_j, q_j):
the hulls meet iff there are multipliers summing to one on each side with

    sum_i lambda_i c_i + A_i p_i  =  sum_j mu_j d_j - B_j q_j,
    ||p_i|| <= lambda_i,  ||q_j|| <= mu_j.

PDHG on this feasibility problem either converges to such a point (the hulls
intersect) or produces a nonzero dual displacement v_D = (s, t, w) which,
after picking any level s' strictly between -s and t, yields the strict
separating hyperplane <w, x> = s'.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import cones, diagnostics
from .conic import ConicPrimalProblem, solve_conic_with_limit
from .errors import DimensionMismatch, SingularShapeMatrix, ZeroNormal
from .linalg import as_matrix, as_vector

COMMON_POINT = "common_point"
SEPARATOR = "separator"
INCONCLUSIVE = "inconclusive"

_PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class Ellipsoid:
    """shape is invertible d x d; the ellipsoid is center + shape * (unit ball)."""

    shape: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "shape", as_matrix(self.shape))
        d = self.shape.shape[0]
        object.__setattr__(self, "center", as_vector(self.center, d))
        if self.shape.shape != (d, d):
            raise DimensionMismatch("shape matrix must be square")

    @property
    def dim(self):
        return self.shape.shape[0]

    def min_pivot(self):
        with warnings.catch_warnings():
            # scipy warns on exactly-zero pivots; the caller inspects them
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, _ = scipy.linalg.lu_factor(self.shape, check_finite=False)
        return float(np.min(np.abs(np.diag(lu))))

    def boundary_point(self, direction):
        u = np.asarray(direction, dtype=float)
        return self.center + self.shape @ (u / np.linalg.norm(u))


class SeparationInstance:
    """Two nonempty ellipsoid families sharing an ambient dimension.

    Degenerate (numerically singular) shape matrices are rejected at
    ingestion: regularizing them silently would change the instance.
    """

    def __init__(self, side_one, side_two):
        self.side_one = list(side_one)
        self.side_two = list(side_two)
        if not self.side_one or not self.side_two:
            raise ValueError("each side needs at least one ellipsoid")
        self.dim = self.side_one[0].dim
        for side, name in ((self.side_one, "one"), (self.side_two, "two")):
            for i, e in enumerate(side):
                if e.dim != self.dim:
                    raise DimensionMismatch("ellipsoid dimensions differ")
                if e.min_pivot() < _PIVOT_TOL:
                    raise SingularShapeMatrix(i, side=name)


def assemble(inst):
    """Build the conic feasibility problem for a separation instance.

    Variable layout: one (scalar, vector) block of size d+1 per ellipsoid,
    side one first, matching the second-order-cone layout.  The constraint
    matrix has d+2 rows: the first two select the side-one and side-two
    scalars, the bottom d rows hold [center_i | shape_i] for side one and
    [-center_j | shape_j] for side two; the right-hand side is (1, 1, 0...).
    """
    d = inst.dim
    k, l = len(inst.side_one), len(inst.side_two)
    n = (k + l) * (d + 1)
    A = np.zeros((d + 2, n))
    col = 0
    for e in inst.side_one:
        A[0, col] = 1.0
        A[2:, col] = e.center
        A[2:, col + 1:col + 1 + d] = e.shape
        col += d + 1
    for e in inst.side_two:
        A[1, col] = 1.0
        A[2:, col] = -e.center
        A[2:, col + 1:col + 1 + d] = e.shape
        col += d + 1
    b = np.zeros(d + 2)
    b[0] = 1.0
    b[1] = 1.0
    C = cones.Product(tuple(cones.SecondOrder(d + 1) for _ in range(k + l)))
    return ConicPrimalProblem(C=C, A=A, b=b, c=np.zeros(n))


@dataclass(frozen=True)
class SeparationOutcome:
    status: str
    # common-point fields
    point: np.ndarray = None
    lambdas: np.ndarray = None
    mus: np.ndarray = None
    ps: list = None
    qs: list = None
    reconstruction_gap: float = None
    # separator fields
    w: np.ndarray = None
    s: float = None
    t: float = None
    s_prime: float = None
    margins_one: list = None
    margins_two: list = None
    v_dual: np.ndarray = None
    # always present
    diagnostics: dict = field(default_factory=dict)


def _blocks(x, d, count):
    for i in range(count):
        blk = x[i * (d + 1):(i + 1) * (d + 1)]
        yield float(blk[0]), blk[1:].copy()


def verify_halfspace_containment(ellipsoid, w, s, strict=False):
    """Is E contained in {x : <w, x> <= s}?  Returns (contained, margin).

    Containment holds iff s >= ||shape^T w|| + <center, w>; the margin is the
    left-over slack, positive margins mean strict containment.
    """
    w = np.asarray(w, dtype=float)
    if np.linalg.norm(w) == 0.0:
        raise ZeroNormal("halfspace normal is zero")
    margin = float(s - np.linalg.norm(ellipsoid.shape.T @ w) - ellipsoid.center @ w)
    contained = margin > 0.0 if strict else margin >= 0.0
    return contained, margin


def separate(inst, sigma=None, tau=None, max_iter=60_000, residual_tol=1e-9,
             eps_cert=1e-6, check_tol=1e-8, seed=0):
    """Decide separation (or a common hull point) for an instance.

    Runs PDHG on the assembled feasibility problem.  A converged run with
    A x_bar = b recovers the barycentric data of a common point of the two
    convex hulls.  A nonzero dual displacement (s, t, w) is validated
    (s > -t, w != 0, membership of (0, v_D) in the attained range with the
    converged primal point as witness) and converted into the hyperplane
    <w, x> = s' at the midpoint s' = (t - s)/2 of the admissible interval
    ]-s, t[, with per-ellipsoid strict containment margins.  Runs that stop
    at the iteration limit without a stabilized displacement come back
    Inconclusive with the residual report attached.
    """
    cp = assemble(inst)
    d = inst.dim
    k, l = len(inst.side_one), len(inst.side_two)
    result = solve_conic_with_limit(
        cp, sigma=sigma, tau=tau, max_iter=max_iter,
        residual_tol=residual_tol, seed=seed, check_kernel=False,
    )
    # the assembled constraint matrix always satisfies the kernel condition:
    # scalar rows force all multipliers of a cone-feasible kernel vector to 0
    verdict = diagnostics.classify(
        result.trace, result.v, result.metric,
        diagnostics.ClassifyThresholds(eps_cert=eps_cert, residual_tol=residual_tol),
    )
    diag = {
        "verdict": verdict.status,
        "iterations": result.trace.iterations,
        "final_residual_m": verdict.residual_report.get("final_residual_m"),
        "v_m_norm": result.v.m_norm,
        "norm_v_primal": float(np.linalg.norm(result.v.v_primal)),
        "sigma": float(result.metric.sigma),
        "tau": float(result.metric.tau),
    }

    if verdict.status == diagnostics.CONSISTENT:
        x_bar = result.x_bar
        constraint_gap = float(np.linalg.norm(cp.A @ x_bar - cp.b))
        diag["constraint_gap"] = constraint_gap
        lam, ps, mu, qs = [], [], [], []
        for scalar, vec in _blocks(x_bar, d, k):
            lam.append(scalar)
            ps.append(vec)
        for scalar, vec in _blocks(x_bar[k * (d + 1):], d, l):
            mu.append(scalar)
            qs.append(vec)
        point_one = sum(
            lam[i] * inst.side_one[i].center + inst.side_one[i].shape @ ps[i]
            for i in range(k)
        )
        point_two = sum(
            mu[j] * inst.side_two[j].center - inst.side_two[j].shape @ qs[j]
            for j in range(l)
        )
        gap = float(np.linalg.norm(point_one - point_two))
        return SeparationOutcome(
            status=COMMON_POINT,
            point=point_one,
            lambdas=np.asarray(lam),
            mus=np.asarray(mu),
            ps=ps,
            qs=qs,
            reconstruction_gap=gap,
            diagnostics=diag,
        )

    if verdict.status == diagnostics.PRIMAL_INFEASIBLE:
        vD = result.v.v_dual
        s, t, w = float(vD[0]), float(vD[1]), vD[2:].copy()
        diag["s_plus_t"] = s + t
        if np.linalg.norm(w) <= 1e-9 * np.linalg.norm(vD) or s <= -t:
            return SeparationOutcome(status=INCONCLUSIVE, diagnostics=diag)
        member = diagnostics.check_membership_V_conic(
            cp, result.metric.sigma, result.metric.tau,
            np.zeros(cp.n), vD, -result.x_bar, np.zeros(cp.m), check_tol,
        )
        diag["range_membership"] = member.residuals
        s_prime = 0.5 * (t - s)
        margins_one, margins_two = [], []
        ok = True
        for e in inst.side_one:
            contained, margin = verify_halfspace_containment(e, w, s_prime, strict=True)
            margins_one.append(margin)
            ok &= contained
        for e in inst.side_two:
            contained, margin = verify_halfspace_containment(e, -w, -s_prime, strict=True)
            margins_two.append(margin)
            ok &= contained
        if not ok or not member.member:
            return SeparationOutcome(status=INCONCLUSIVE, diagnostics=diag)
        return SeparationOutcome(
            status=SEPARATOR,
            w=w, s=s, t=t, s_prime=s_prime,
            margins_one=margins_one, margins_two=margins_two,
            v_dual=vD.copy(),
            diagnostics=diag,
        )

    return SeparationOutcome(status=INCONCLUSIVE, diagnostics=diag)


def sample_check_separation(inst, outcome, count, seed):
    """Empirical cross-check of a separator on sampled boundary points.

    Samples ``count`` boundary points per ellipsoid (center + shape * unit
    direction) and returns the worst signed margin: min over side one of
    s' - <w, x> and over side two of <w, x> - s'.  Positive means every
    sampled point is strictly on its side.
    """
    if outcome.status != SEPARATOR:
        raise ValueError("sample_check_separation needs a separator outcome")
    rng = np.random.default_rng(seed)
    d = inst.dim
    w, sp = outcome.w, outcome.s_prime
    worst = np.inf
    for e in inst.side_one:
        for _ in range(count):
            x = e.boundary_point(rng.standard_normal(d))
            worst = min(worst, sp - w @ x)
    for e in inst.side_two:
        for _ in range(count):
            x = e.boundary_point(rng.standard_normal(d))
            worst = min(worst, w @ x - sp)
    return float(worst)
