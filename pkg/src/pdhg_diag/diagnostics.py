"""Displacement-vector estimation, range sampling, and inconsistency classification.

The displacement vector v is the minimal-M-norm element of the closure of
ran(Id - T).  Along any PDHG run, z_k - z_{k+1} -> v and z_k / k -> -v, so v
is estimated from iterate differences.  A nonzero v flags inconsistency; the
front-end modules turn its blocks into validated certificates.  The estimate
satisfies a variational inequality against every point of ran(dF + S), whose
product form for polyhedral cones is sampled here.
"""

from dataclasses import dataclass, field

import numpy as np

from . import cones
from .core import Iterate
from .errors import EmptyTrace, NonPolyhedralCone

CONSISTENT = "consistent_candidate"
PRIMAL_INFEASIBLE = "primal_infeasible"
DUAL_INFEASIBLE = "dual_infeasible"
BOTH_INFEASIBLE = "both_infeasible"
INCONCLUSIVE = "inconclusive"

LAST_DIFFERENCE = "last_difference"
AVERAGED_DIFFERENCES = "averaged_differences"
PAZY_SCALED = "pazy_scaled"


@dataclass(frozen=True)
class DisplacementEstimate:
    v_primal: np.ndarray
    v_dual: np.ndarray
    method: str
    m_norm: float
    iterations_used: int

    def as_iterate(self):
        return Iterate(self.v_primal, self.v_dual)


def estimate_displacement(trace, metric, method=AVERAGED_DIFFERENCES, window=10):
    """Estimate v from a completed trace.

    ``last_difference`` takes the final difference; ``averaged_differences``
    the mean of the last ``window`` differences (damps the tail oscillation
    without biasing the limit); ``pazy_scaled`` returns -z_K/K from the final
    iterate, which converges much more slowly and is mainly a cross-check.
    """
    if method == PAZY_SCALED:
        if trace.z_final is None or trace.iterations < 1:
            raise EmptyTrace("no completed iterations in trace")
        k = trace.iterations
        vx = -trace.z_final.x / k
        vy = -trace.z_final.y / k
        label = PAZY_SCALED
    else:
        diffs = trace.differences
        if not diffs:
            raise EmptyTrace("trace holds no differences")
        if method == LAST_DIFFERENCE:
            vx, vy = diffs[-1]
            vx, vy = vx.copy(), vy.copy()
            label = LAST_DIFFERENCE
        elif method == AVERAGED_DIFFERENCES:
            if len(diffs) < window:
                raise EmptyTrace(
                    "need %d differences for window, trace holds %d"
                    % (window, len(diffs))
                )
            tail = list(diffs)[-window:]
            vx = np.mean([d[0] for d in tail], axis=0)
            vy = np.mean([d[1] for d in tail], axis=0)
            label = "%s(%d)" % (AVERAGED_DIFFERENCES, window)
        else:
            raise ValueError("unknown estimation method %r" % (method,))
    v = Iterate(vx, vy)
    return DisplacementEstimate(
        v_primal=vx,
        v_dual=vy,
        method=label,
        m_norm=metric.norm(v),
        iterations_used=trace.iterations,
    )


@dataclass(frozen=True)
class RangeSample:
    """One point (r, d) of ran(dF + S) = (ran H + A^T K_polar + c) x (K + ran A + b)."""

    r: np.ndarray
    d: np.ndarray
    witness: dict


def _draw_cone_point(cone, rng):
    """Exact sample from a polyhedral cone: half-normal per orthant block."""
    if isinstance(cone, cones.Zero):
        return np.zeros(cone.dim)
    if isinstance(cone, cones.Free):
        return rng.standard_normal(cone.dim)
    if isinstance(cone, cones.NonnegOrthant):
        return np.abs(rng.standard_normal(cone.dim))
    if isinstance(cone, cones.NonposOrthant):
        return -np.abs(rng.standard_normal(cone.dim))
    if isinstance(cone, cones.SecondOrder) and cone.dim == 1:
        return np.abs(rng.standard_normal(1))
    if isinstance(cone, cones.Product):
        return np.concatenate([_draw_cone_point(f, rng) for f in cone.factors])
    raise NonPolyhedralCone("cannot sample exactly from %r" % (cone,))


def sample_range(qp, count, seed):
    """Draw ``count`` points of ran(dF + S) for a polyhedral QP instance.

    r = H u + A^T p + c with p drawn in the polar of K and u Gaussian;
    d = q + A w + b with q drawn in K and w Gaussian.  Deterministic per seed.
    """
    if not cones.is_polyhedral(qp.K):
        raise NonPolyhedralCone(
            "range sampling needs a polyhedral constraint cone"
        )
    K_polar = cones.polar(qp.K)
    rng = np.random.default_rng(seed)
    n = qp.A.shape[1]
    H = qp.H
    out = []
    for _ in range(count):
        p = _draw_cone_point(K_polar, rng)
        u = rng.standard_normal(n)
        q = _draw_cone_point(qp.K, rng)
        w = rng.standard_normal(n)
        r = qp.A.T @ p + qp.c
        if H is not None:
            r = r + H @ u
        d = q + qp.A @ w + qp.b
        out.append(RangeSample(r=r, d=d, witness={"p": p, "u": u, "q": q, "w": w}))
    return out


def check_v_optimality(v, metric, samples, tol):
    """Variational-inequality test: <v, Mv - (r, d)> <= tol for every sample.

    Returns (passed, worst_violation, worst_sample).  The true displacement
    vector satisfies the inequality with slack for every point of the range;
    a perturbed candidate fails on some sample.
    """
    if not samples:
        raise ValueError("check_v_optimality needs at least one sample")
    A = metric.A
    mv_x = v.v_primal / metric.sigma - A.T @ v.v_dual
    mv_y = v.v_dual / metric.tau - A @ v.v_primal
    worst = -np.inf
    worst_sample = None
    for s in samples:
        val = v.v_primal @ (mv_x - s.r) + v.v_dual @ (mv_y - s.d)
        if val > worst:
            worst = val
            worst_sample = s
    return bool(worst <= tol), float(worst), worst_sample


@dataclass(frozen=True)
class VMembershipReport:
    residuals: dict
    member: bool

    def worst(self):
        return max(self.residuals.values())


def check_membership_V_qp(qp, sigma, tau, r, d, witness_w, witness_y, tol):
    """Membership of (r, d) in ran(Id - T) for a polyhedral QP, given witnesses.

    The three conditions are: (1/tau) d - (A w + b) in K;  y - d in K_polar;
    (1/sigma) r - H r = -H w + A^T y + c.
    """
    Hr = np.zeros_like(r) if qp.H is None else qp.H @ r
    Hw = np.zeros_like(r) if qp.H is None else qp.H @ witness_w
    cone_res = cones.membership(
        qp.K, d / tau - (qp.A @ witness_w + qp.b), tol
    ).distance
    polar_res = cones.polar_distance(qp.K, witness_y - d)
    eq_res = float(np.linalg.norm(r / sigma - Hr - (-Hw + qp.A.T @ witness_y + qp.c)))
    residuals = {
        "cone": float(cone_res),
        "polar": float(polar_res),
        "equation": eq_res,
    }
    return VMembershipReport(residuals=residuals, member=all(v <= tol for v in residuals.values()))


def check_membership_V_conic(cp, sigma, tau, r, d, witness_w, witness_y, tol):
    """Membership of (r, d) in the range set for the standard conic primal form.

    Conditions: (1/tau) d = A w + b;  r - w in C;  (1/sigma) r - (A^T y + c)
    in the polar of C.
    """
    eq_res = float(np.linalg.norm(d / tau - (cp.A @ witness_w + cp.b)))
    cone_res = cones.membership(cp.C, r - witness_w, tol).distance
    polar_res = cones.polar_distance(cp.C, r / sigma - (cp.A.T @ witness_y + cp.c))
    residuals = {
        "equation": eq_res,
        "cone": float(cone_res),
        "polar": float(polar_res),
    }
    return VMembershipReport(residuals=residuals, member=all(v <= tol for v in residuals.values()))


@dataclass(frozen=True)
class ClassifyThresholds:
    # Certificate conditions are positively homogeneous, so nonzeroness and
    # re-validation use scale-free defaults.  The growth bound and the
    # flatness ratio are heuristics for 0 in closure(ran(Id-T)) \ ran(Id-T):
    # there the iterates diverge while the difference norms decay to zero
    # without ever flattening, so no difference-based test can certify.
    eps_cert: float = 1e-6
    residual_tol: float = 1e-9
    growth_factor: float = 1e6
    flatness_ratio: float = 0.99


@dataclass(frozen=True)
class InconsistencyVerdict:
    status: str
    evidence: DisplacementEstimate
    residual_report: dict = field(default_factory=dict)


def classify(trace, v, metric, thresholds=ClassifyThresholds(), validator=None):
    """Turn a run + displacement estimate into a feasibility verdict.

    A nonzero primal block certifies dual infeasibility, a nonzero dual block
    primal infeasibility (both: BothInfeasible).  A tiny displacement with a
    converged fixed-point residual is a ConsistentCandidate.  Everything else
    is Inconclusive: either the run stopped early, or the iterates diverge
    while the differences vanish, which no difference-based test can resolve.

    ``validator``, when given, is called with the estimate and must return a
    dict {"dual_ray": bool, "primal_multiplier": bool} confirming that the
    respective certificate residuals pass (the QP front-end supplies this).
    """
    th = thresholds
    report = {
        "final_residual_m": trace.resid_m[-1] if trace.resid_m else float("inf"),
        "v_m_norm": v.m_norm,
        "norm_primal": float(np.linalg.norm(v.v_primal)),
        "norm_dual": float(np.linalg.norm(v.v_dual)),
    }
    growth = bool(
        trace.norm_z and trace.norm_z[-1] > th.growth_factor * (1.0 + trace.norm_z0)
    )
    report["norm_growth"] = growth

    if v.m_norm <= th.eps_cert:
        if report["final_residual_m"] <= th.residual_tol and not growth:
            return InconsistencyVerdict(CONSISTENT, v, report)
        return InconsistencyVerdict(INCONCLUSIVE, v, report)

    # nonzero displacement: require the difference sequence to have stabilized
    last = trace.last_difference()
    if last is None:
        return InconsistencyVerdict(INCONCLUSIVE, v, report)
    stab = metric.norm(Iterate(last[0] - v.v_primal, last[1] - v.v_dual))
    report["stabilization"] = stab
    if stab > th.eps_cert * max(1.0, v.m_norm):
        return InconsistencyVerdict(INCONCLUSIVE, v, report)
    # ... and to have flattened: ||z_k - z_{k+1}||_M is nonincreasing, and it
    # levels off at ||v||_M > 0 exactly when the displacement is genuine.  A
    # still-shrinking curve means the apparent v is a slowly decaying
    # transient (differences can decay like 1/sqrt(k) on instances where 0
    # lies in the closure of the range but not the range itself).
    mid = trace.resid_m[len(trace.resid_m) // 2]
    report["flatness"] = trace.resid_m[-1] / mid if mid > 0 else 1.0
    if report["flatness"] < th.flatness_ratio:
        return InconsistencyVerdict(INCONCLUSIVE, v, report)

    primal_nonzero = report["norm_primal"] > th.eps_cert
    dual_nonzero = report["norm_dual"] > th.eps_cert
    if validator is not None:
        checks = validator(v)
        if primal_nonzero and not checks.get("dual_ray", False):
            return InconsistencyVerdict(INCONCLUSIVE, v, report)
        if dual_nonzero and not checks.get("primal_multiplier", False):
            return InconsistencyVerdict(INCONCLUSIVE, v, report)
    if primal_nonzero and dual_nonzero:
        return InconsistencyVerdict(BOTH_INFEASIBLE, v, report)
    if dual_nonzero:
        return InconsistencyVerdict(PRIMAL_INFEASIBLE, v, report)
    if primal_nonzero:
        return InconsistencyVerdict(DUAL_INFEASIBLE, v, report)
    return InconsistencyVerdict(INCONCLUSIVE, v, report)
