"""Shared instance builders for the test suite."""

import numpy as np
import pytest

from pdhg_diag import Iterate, cones, ellipsoid, qp


def lp_instance():
    """Infeasible LP: min x1 - 2 x2 s.t. -x1+x2 <= -2, x1-x2 <= 1, x >= 0."""
    A = np.array([[-1.0, 1.0], [1.0, -1.0], [-1.0, 0.0], [0.0, -1.0]])
    b = np.array([-2.0, 1.0, 0.0, 0.0])
    c = np.array([1.0, -2.0])
    return qp.QpProblem(None, c, A, b)


def qp_instance():
    """Same constraints with the identity quadratic term."""
    A = np.array([[-1.0, 1.0], [1.0, -1.0], [-1.0, 0.0], [0.0, -1.0]])
    b = np.array([-2.0, 1.0, 0.0, 0.0])
    c = np.array([1.0, -2.0])
    return qp.QpProblem(np.eye(2), c, A, b)


def start_point():
    return Iterate(np.zeros(2), np.array([0.0, 0.0, -1.0, -1.0]))


V_PRIMAL_LP = -0.15 * np.ones(2)
V_DUAL = -0.15 * np.array([1.0, 1.0, 0.0, 0.0])
SIGMA = TAU = 0.3


def feasible_lp():
    """min x s.t. x >= 0 (optimum 0 at the origin)."""
    return qp.QpProblem(None, np.array([1.0]), np.array([[-1.0]]), np.array([0.0]))


def feasible_qp():
    """min 0.5 x^2 - x s.t. x <= 2 (optimum at x = 1, constraint slack)."""
    return qp.QpProblem(
        np.array([[1.0]]), np.array([-1.0]), np.array([[1.0]]), np.array([2.0])
    )


def random_infeasible_lp(rng):
    """Random LP plus a contradictory row pair a.x <= -1, -a.x <= -1."""
    n = int(rng.integers(2, 6))
    m = int(rng.integers(2, 6))
    A0 = rng.normal(size=(m, n))
    b0 = rng.normal(size=m)
    c = rng.normal(size=n)
    a = rng.normal(size=n)
    A = np.vstack([A0, a, -a])
    b = np.concatenate([b0, [-1.0, -1.0]])
    return qp.QpProblem(None, c, A, b)


def random_shape(rng, d):
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return q @ np.diag(rng.uniform(0.3, 1.2, size=d))


def disjoint_instance(rng, d, k, l, gap):
    """Ellipsoid families separated by a slab of width >= gap along a random axis."""
    g = rng.normal(size=d)
    g /= np.linalg.norm(g)
    sides = []
    for count, sign in ((k, -1.0), (l, 1.0)):
        ells = []
        for _ in range(count):
            shape = random_shape(rng, d)
            extent = np.linalg.norm(shape.T @ g)
            center = rng.normal(size=d)
            center -= (center @ g) * g
            center += sign * g * (gap / 2 + extent + rng.uniform(0.0, 2.0))
            ells.append(ellipsoid.Ellipsoid(shape, center))
        sides.append(ells)
    return ellipsoid.SeparationInstance(sides[0], sides[1])


def overlapping_instance(rng, d, k, l):
    """Families whose hulls share a forced common point."""
    point = rng.normal(size=d)
    sides = []
    for count in (k, l):
        ells = []
        shape = random_shape(rng, d)
        u = rng.normal(size=d)
        u *= rng.uniform(0.0, 0.8) / np.linalg.norm(u)
        ells.append(ellipsoid.Ellipsoid(shape, point - shape @ u))
        for _ in range(count - 1):
            ells.append(ellipsoid.Ellipsoid(random_shape(rng, d), rng.normal(size=d) * 2))
        sides.append(ells)
    return ellipsoid.SeparationInstance(sides[0], sides[1])


ALL_CONE_VARIANTS = [
    cones.Zero(4),
    cones.Free(4),
    cones.NonnegOrthant(4),
    cones.NonposOrthant(4),
    cones.SecondOrder(1),
    cones.SecondOrder(3),
    cones.SecondOrder(5),
    cones.Product((cones.NonnegOrthant(2), cones.SecondOrder(3), cones.Zero(1))),
]
