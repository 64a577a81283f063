"""Quadratic-programming front-end.

Instances are  min 0.5 <x, Hx> + <c, x>  s.t.  A x - b in K  with H symmetric
positive semidefinite and K a polyhedral cone (default: the nonpositive
orthant, i.e. A x <= b).  The primal prox is the linear solve with Id + sigma*H
(factorized once per sigma and cached), the dual prox the shifted projection
onto the polar cone.

A nonzero primal displacement block is a ray certifying dual infeasibility; a
nonzero dual block a multiplier certifying primal infeasibility.  Both are
positively homogeneous, so certificates are reported at unit norm.
"""

import threading
from dataclasses import dataclass

import numpy as np

from . import cones, diagnostics
from .core import Iterate, SaddleProblem, apply_T, apply_shifted_T, validate_steps
from .errors import (CertificateValidationFailed, DimensionMismatch,
                     NonPolyhedralCone, NotPositiveDefinite)
from .linalg import as_matrix, as_vector, operator_norm_estimate, spd_factorize

DUAL_INFEASIBLE_RAY = "dual_infeasible_ray"
PRIMAL_INFEASIBLE_MULTIPLIER = "primal_infeasible_multiplier"

_PSD_PROBES = 100
_PSD_TOL = 1e-10


class QpProblem:
    """Problem data (H, c, A, b, K); immutable and shareable across solves."""

    def __init__(self, H, c, A, b, K=None, seed=0):
        self.A = as_matrix(A)
        m, n = self.A.shape
        self.c = as_vector(c, n)
        self.b = as_vector(b, m)
        self.K = cones.NonposOrthant(m) if K is None else K
        if self.K.dim != m:
            raise DimensionMismatch("cone dim %d != row count %d" % (self.K.dim, m))
        if not cones.is_polyhedral(self.K):
            raise NonPolyhedralCone(
                "QP front-end accepts polyhedral constraint cones only"
            )
        if H is None:
            self.H = None
        else:
            self.H = as_matrix(H, n, n)
            if np.max(np.abs(self.H - self.H.T)) > 1e-10:
                raise NotPositiveDefinite("H is not symmetric to tolerance 1e-10")
            rng = np.random.default_rng(seed)
            for _ in range(_PSD_PROBES):
                x = rng.standard_normal(n)
                if x @ (self.H @ x) < -_PSD_TOL:
                    raise NotPositiveDefinite("H fails a Rayleigh-quotient probe")
        self._norm_A = None
        self._fact_cache = {}
        self._lock = threading.Lock()

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def m(self):
        return self.A.shape[0]

    def norm_A(self, seed=0):
        with self._lock:
            if self._norm_A is None:
                self._norm_A = (
                    0.0 if not np.any(self.A) else operator_norm_estimate(self.A, seed=seed)
                )
        return self._norm_A

    def resolvent_factorization(self, sigma):
        """Cholesky factor of Id + sigma*H, cached per sigma."""
        with self._lock:
            fact = self._fact_cache.get(sigma)
            if fact is None:
                fact = spd_factorize(np.eye(self.n) + sigma * self.H)
                self._fact_cache[sigma] = fact
        return fact


def build_saddle(qp, sigma=None, tau=None, seed=0):
    """Specialize the PDHG engine to a QP instance.

    prox_f(s, r) solves (Id + s*H) x = r - s*c (plain shift when H == 0);
    prox_gstar(t, p) projects p - t*b onto the polar of K.  The factorization
    of Id + sigma*H is computed once per step size and reused across
    iterations, since the coefficient matrix never changes along the run.
    """
    norm_A = qp.norm_A(seed=seed)
    if qp.H is None:
        def prox_f(s, r):
            return r - s * qp.c
    else:
        def prox_f(s, r):
            return qp.resolvent_factorization(s).solve(r - s * qp.c)

    def prox_gstar(t, p):
        return cones.project_polar(qp.K, p - t * qp.b)

    return SaddleProblem(qp.A, prox_f, prox_gstar, sigma=sigma, tau=tau,
                         norm_A=norm_A, seed=seed)


@dataclass(frozen=True)
class QpDual:
    """View of the Lagrangian dual: max -0.5 <q, Hq> - <b, y> over H q = -(c + A^T y), y in polar(K).

    Carries no data of its own; everything is derived from the primal.  For
    the default cone K (A x <= b) the multiplier constraint is y >= 0.
    """

    primal: QpProblem

    def objective(self, q, y):
        Hq = np.zeros_like(q) if self.primal.H is None else self.primal.H @ q
        return float(-0.5 * (q @ Hq) - self.primal.b @ y)

    def constraint_residual(self, q, y):
        """Euclidean violation of H q = -(c + A^T y)."""
        Hq = np.zeros_like(q) if self.primal.H is None else self.primal.H @ q
        return float(np.linalg.norm(Hq + self.primal.c + self.primal.A.T @ y))

    def multiplier_cone_distance(self, y):
        return cones.polar_distance(self.primal.K, y)

    def is_feasible(self, q, y, tol):
        return (self.constraint_residual(q, y) <= tol
                and self.multiplier_cone_distance(y) <= tol)


@dataclass(frozen=True)
class StaticDisplacementReport:
    residuals: dict
    passed: bool

    def worst(self):
        return max(self.residuals.values())


def check_static_displacement(qp, sigma, tau, v, tol):
    """Evaluate the stationary identities the displacement vector must satisfy.

    With u = -v_D - tau*A v_R these are: -v_D is the polar part and -tau*A v_R
    the cone part of the Moreau split of u; <A v_R, v_D> = 0; A^T v_D + H v_R
    = 0 and separately H v_R = 0, A^T v_D = 0; v_R is fixed by the resolvent
    of sigma*H; componentwise complementarity between A v_R and v_D with the
    sign pattern dictated by K.
    """
    vR, vD = v.v_primal, v.v_dual
    AvR = qp.A @ vR
    HvR = np.zeros_like(vR) if qp.H is None else qp.H @ vR
    u = -vD - tau * AvR
    if qp.H is None:
        jv = vR
    else:
        jv = qp.resolvent_factorization(sigma).solve(vR)
    residuals = {
        "polar_projection": float(np.linalg.norm(-vD - cones.project_polar(qp.K, u))),
        "cone_projection": float(np.linalg.norm(-tau * AvR - cones.project(qp.K, u))),
        "orthogonality": float(abs(AvR @ vD)),
        "gradient_equation": float(np.linalg.norm(qp.A.T @ vD + HvR)),
        "h_kernel": float(np.linalg.norm(HvR)),
        "adjoint_kernel": float(np.linalg.norm(qp.A.T @ vD)),
        "resolvent_fixed": float(np.linalg.norm(jv - vR)),
        "complementarity": float(np.max(np.minimum(np.abs(AvR), np.abs(vD)), initial=0.0)),
        "sign_primal_image": cones.membership(qp.K, -AvR, tol).distance,
        "sign_dual": cones.polar_distance(qp.K, -vD),
    }
    return StaticDisplacementReport(
        residuals=residuals, passed=all(r <= tol for r in residuals.values())
    )


@dataclass(frozen=True)
class QpCertificate:
    kind: str
    vector: np.ndarray
    residuals: dict


def _dual_ray_residuals(qp, sigma, vR):
    """Residuals for v_R as a dual-infeasibility ray, at unit norm.

    Conditions (homogeneous of degree one): H v = 0, -A v in K, and
    <c, v> >= ||v_R||/sigma > 0 after normalization.
    """
    scale = np.linalg.norm(vR)
    ray = vR / scale
    Hv = np.zeros_like(ray) if qp.H is None else qp.H @ ray
    return ray, {
        "eq_residual": float(np.linalg.norm(Hv)),
        "cone_residual": cones.membership(qp.K, -(qp.A @ ray), 0.0).distance,
        "strict_margin": float(qp.c @ ray - scale / sigma),
        "objective_inner": float(qp.c @ ray),
    }


def _primal_multiplier_residuals(qp, tau, vD):
    """Residuals for v_D as a primal-infeasibility multiplier, at unit norm.

    Conditions: A^T v = 0, -v in the polar of K, and <b, v> >= ||v_D||/tau > 0
    after normalization.
    """
    scale = np.linalg.norm(vD)
    mult = vD / scale
    return mult, {
        "eq_residual": float(np.linalg.norm(qp.A.T @ mult)),
        "cone_residual": cones.polar_distance(qp.K, -mult),
        "strict_margin": float(qp.b @ mult - scale / tau),
        "objective_inner": float(qp.b @ mult),
    }


def _certificate_ok(residuals, tol):
    return (
        residuals["eq_residual"] <= tol
        and residuals["cone_residual"] <= tol
        and residuals["strict_margin"] >= -tol
        and residuals["objective_inner"] > 0.0
    )


def extract_certificates(qp, sigma, tau, v, tol=1e-8, eps_cert=1e-6):
    """Emit validated unit-norm infeasibility certificates from a displacement estimate.

    Raises CertificateValidationFailed when a block is nonzero (above
    eps_cert) but its residuals exceed tol, which signals the run was stopped
    before the differences stabilized.
    """
    out = []
    if np.linalg.norm(v.v_primal) > eps_cert:
        ray, res = _dual_ray_residuals(qp, sigma, v.v_primal)
        if not _certificate_ok(res, tol):
            raise CertificateValidationFailed(DUAL_INFEASIBLE_RAY, res)
        out.append(QpCertificate(DUAL_INFEASIBLE_RAY, ray, res))
    if np.linalg.norm(v.v_dual) > eps_cert:
        mult, res = _primal_multiplier_residuals(qp, tau, v.v_dual)
        if not _certificate_ok(res, tol):
            raise CertificateValidationFailed(PRIMAL_INFEASIBLE_MULTIPLIER, res)
        out.append(QpCertificate(PRIMAL_INFEASIBLE_MULTIPLIER, mult, res))
    return out


def certificate_validator(qp, sigma, tau, tol=1e-8, eps_cert=1e-6):
    """Validator hook for diagnostics.classify: non-raising certificate checks."""

    def validate(v):
        checks = {}
        if np.linalg.norm(v.v_primal) > eps_cert:
            _, res = _dual_ray_residuals(qp, sigma, v.v_primal)
            checks["dual_ray"] = _certificate_ok(res, tol)
        if np.linalg.norm(v.v_dual) > eps_cert:
            _, res = _primal_multiplier_residuals(qp, tau, v.v_dual)
            checks["primal_multiplier"] = _certificate_ok(res, tol)
        return checks

    return validate


def shifted_iterate_experiment(qp, sigma, tau, z0, v_ref, iters):
    """Track the difference and shifted-residual curves for ``iters`` iterations.

    Per iteration k the columns are ||x_k - x_{k+1}||, ||y_k - y_{k+1}||, the
    same differences minus the reference displacement blocks, and the two
    Euclidean blocks of (z_k + k v) - (v + T)(z_k + k v), i.e. the residual of
    the shifted iterate against the shifted map.  The shifted residual
    stabilizes at a nonzero level: the limit of z_k + k v need not be a fixed
    point of v + T.
    """
    problem = build_saddle(qp, sigma, tau)
    validate_steps(problem)
    vR, vD = np.asarray(v_ref.v_primal, dtype=float), np.asarray(v_ref.v_dual, dtype=float)
    x, y = np.asarray(z0.x, dtype=float), np.asarray(z0.y, dtype=float)
    cols = {name: [] for name in (
        "k", "norm_dx", "norm_dy", "norm_dx_minus_vR", "norm_dy_minus_vD",
        "shifted_resid_x", "shifted_resid_y")}
    v_it = Iterate(vR, vD)
    for k in range(iters):
        wx, wy = x + k * vR, y + k * vD
        shifted = apply_shifted_T(problem, v_it, Iterate(wx, wy))
        nxt = apply_T(problem, Iterate(x, y))
        dx, dy = x - nxt.x, y - nxt.y
        cols["k"].append(k)
        cols["norm_dx"].append(float(np.linalg.norm(dx)))
        cols["norm_dy"].append(float(np.linalg.norm(dy)))
        cols["norm_dx_minus_vR"].append(float(np.linalg.norm(dx - vR)))
        cols["norm_dy_minus_vD"].append(float(np.linalg.norm(dy - vD)))
        cols["shifted_resid_x"].append(float(np.linalg.norm(wx - shifted.x)))
        cols["shifted_resid_y"].append(float(np.linalg.norm(wy - shifted.y)))
        x, y = nxt.x, nxt.y
    return {name: np.asarray(vals) for name, vals in cols.items()}
