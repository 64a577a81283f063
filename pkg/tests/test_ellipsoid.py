import numpy as np
import pytest
from numpy.testing import assert_allclose

import conftest as fx
from pdhg_diag import cones, ellipsoid
from pdhg_diag.errors import SingularShapeMatrix, ZeroNormal


def disks(c1, c2, r1=1.0, r2=1.0):
    return ellipsoid.SeparationInstance(
        [ellipsoid.Ellipsoid(r1 * np.eye(2), np.asarray(c1, dtype=float))],
        [ellipsoid.Ellipsoid(r2 * np.eye(2), np.asarray(c2, dtype=float))],
    )


class TestIngestion:
    def test_singular_shape_rejected_with_index(self):
        good = ellipsoid.Ellipsoid(np.eye(2), np.zeros(2))
        bad = ellipsoid.Ellipsoid(np.array([[1.0, 1.0], [1.0, 1.0]]), np.zeros(2))
        with pytest.raises(SingularShapeMatrix) as exc:
            ellipsoid.SeparationInstance([good], [good, bad])
        assert exc.value.index == 1
        assert exc.value.side == "two"

    def test_dimension_agreement(self):
        e2 = ellipsoid.Ellipsoid(np.eye(2), np.zeros(2))
        e3 = ellipsoid.Ellipsoid(np.eye(3), np.zeros(3))
        with pytest.raises(Exception):
            ellipsoid.SeparationInstance([e2], [e3])

    def test_empty_side_rejected(self):
        e2 = ellipsoid.Ellipsoid(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError):
            ellipsoid.SeparationInstance([e2], [])


class TestAssemble:
    def test_interval_transcription(self):
        # unit intervals centered at -3 (side one) and +3 (side two)
        inst = ellipsoid.SeparationInstance(
            [ellipsoid.Ellipsoid(np.eye(1), np.array([-3.0]))],
            [ellipsoid.Ellipsoid(np.eye(1), np.array([3.0]))],
        )
        cp = ellipsoid.assemble(inst)
        assert_allclose(cp.A, [[1.0, 0.0, 0.0, 0.0],
                               [0.0, 0.0, 1.0, 0.0],
                               [-3.0, 1.0, -3.0, 1.0]])
        assert_allclose(cp.b, [1.0, 1.0, 0.0])
        assert_allclose(cp.c, np.zeros(4))

    def test_cone_structure(self):
        rng = np.random.default_rng(1)
        inst = fx.disjoint_instance(rng, d=3, k=2, l=1, gap=1.0)
        cp = ellipsoid.assemble(inst)
        assert isinstance(cp.C, cones.Product)
        assert len(cp.C.factors) == 3
        assert all(f == cones.SecondOrder(4) for f in cp.C.factors)
        assert cp.A.shape == (5, 12)
        assert_allclose(cp.b, [1.0, 1.0, 0.0, 0.0, 0.0])

    def test_scalar_rows_select_multipliers(self):
        rng = np.random.default_rng(2)
        inst = fx.disjoint_instance(rng, d=2, k=2, l=2, gap=0.5)
        cp = ellipsoid.assemble(inst)
        x = rng.normal(size=cp.n)
        lam = x[0] + x[3]
        mu = x[6] + x[9]
        out = cp.A @ x
        assert out[0] == pytest.approx(lam)
        assert out[1] == pytest.approx(mu)


class TestSeparate:
    def test_disjoint_disks_separator(self):
        inst = disks([-3.0, 0.0], [3.0, 0.0])
        out = ellipsoid.separate(inst, max_iter=10_000)
        assert out.status == ellipsoid.SEPARATOR
        assert out.s > -out.t
        # the hyperplane normal points along the center line
        w_dir = out.w / np.linalg.norm(out.w)
        assert_allclose(np.abs(w_dir), [1.0, 0.0], atol=1e-9)
        assert all(m > 0 for m in out.margins_one + out.margins_two)
        assert out.s_prime == pytest.approx(0.5 * (out.t - out.s))
        # symmetric instance: separating level through the origin
        assert out.s_prime == pytest.approx(0.0, abs=1e-10)
        assert out.diagnostics["range_membership"]["equation"] <= 1e-8

    def test_separator_identity_s_plus_t(self):
        inst = disks([-1.0, 0.0], [5.0, 0.0])
        out = ellipsoid.separate(inst, max_iter=20_000)
        assert out.status == ellipsoid.SEPARATOR
        vD = out.v_dual
        assert out.s + out.t == pytest.approx(
            vD @ vD / out.diagnostics["tau"], abs=1e-8)
        assert all(m > 0 for m in out.margins_one + out.margins_two)

    def test_overlapping_disks_common_point(self):
        inst = disks([-0.5, 0.0], [0.5, 0.0])
        out = ellipsoid.separate(inst)
        assert out.status == ellipsoid.COMMON_POINT
        assert np.linalg.norm(out.point) <= 1e-6  # intersection contains the origin
        assert out.lambdas.sum() == pytest.approx(1.0, abs=1e-8)
        assert out.mus.sum() == pytest.approx(1.0, abs=1e-8)
        assert out.reconstruction_gap <= 1e-6
        for lam, p in zip(out.lambdas, out.ps):
            assert np.linalg.norm(p) <= lam + 1e-9
        for mu, q in zip(out.mus, out.qs):
            assert np.linalg.norm(q) <= mu + 1e-9

    def test_identical_tiny_ellipsoids_meet_at_center(self):
        center = np.array([2.0, -1.0])
        e = ellipsoid.Ellipsoid(1e-3 * np.eye(2), center)
        inst = ellipsoid.SeparationInstance([e], [e])
        out = ellipsoid.separate(inst)
        assert out.status == ellipsoid.COMMON_POINT
        assert np.linalg.norm(out.point - center) <= 1e-6

    def test_iteration_limit_inconclusive(self):
        inst = disks([-3.0, 0.0], [3.0, 0.0])
        out = ellipsoid.separate(inst, max_iter=5)
        assert out.status == ellipsoid.INCONCLUSIVE
        assert "verdict" in out.diagnostics


class TestHalfspaceContainment:
    def test_strictly_contained(self):
        e = ellipsoid.Ellipsoid(np.eye(2), np.array([-3.0, 0.0]))
        contained, margin = ellipsoid.verify_halfspace_containment(
            e, np.array([1.0, 0.0]), -1.0, strict=True)
        assert contained and margin == pytest.approx(1.0)

    def test_supporting_hyperplane(self):
        e = ellipsoid.Ellipsoid(np.eye(2), np.zeros(2))
        contained, margin = ellipsoid.verify_halfspace_containment(
            e, np.array([1.0, 0.0]), 1.0, strict=False)
        assert contained and margin == pytest.approx(0.0)
        strict, _ = ellipsoid.verify_halfspace_containment(
            e, np.array([1.0, 0.0]), 1.0, strict=True)
        assert not strict

    def test_not_contained(self):
        e = ellipsoid.Ellipsoid(np.eye(2), np.zeros(2))
        contained, margin = ellipsoid.verify_halfspace_containment(
            e, np.array([1.0, 0.0]), 0.5)
        assert not contained and margin == pytest.approx(-0.5)

    def test_zero_normal_rejected(self):
        e = ellipsoid.Ellipsoid(np.eye(2), np.zeros(2))
        with pytest.raises(ZeroNormal):
            ellipsoid.verify_halfspace_containment(e, np.zeros(2), 1.0)

    def test_containment_oracle_on_boundary_samples(self):
        # margin formula agrees with direct maximization over boundary points
        rng = np.random.default_rng(6)
        e = ellipsoid.Ellipsoid(fx.random_shape(rng, 3), rng.normal(size=3))
        w = rng.normal(size=3)
        support = max(
            w @ e.boundary_point(rng.normal(size=3)) for _ in range(20_000)
        )
        closed_form = np.linalg.norm(e.shape.T @ w) + e.center @ w
        assert support <= closed_form + 1e-12
        assert support >= closed_form - 1e-3


class TestDisplacementOptimality:
    def test_vi_over_sampled_conic_range(self):
        # v must satisfy <v, Mv - y> <= 0 against points of the range set
        # (C_polar + ran A^T + c) x (b - A(C)); the polar of the product SOC
        # is its negation, so both factors are sampleable directly
        from pdhg_diag import conic, diagnostics
        inst = disks([-3.0, 0.0], [3.0, 0.0])
        cp = ellipsoid.assemble(inst)
        res = conic.solve_conic_with_limit(cp, max_iter=10_000, check_kernel=False)
        rng = np.random.default_rng(3)
        cone_pts = conic.sample_cone_points(cp.C, 1000, seed=3, unit=False)
        samples = []
        for x in cone_pts:
            scale = rng.uniform(0.0, 5.0)
            r = -scale * cones.project(cp.C, rng.standard_normal(cp.n)) \
                + cp.A.T @ rng.standard_normal(cp.m) + cp.c
            d = cp.b - cp.A @ (scale * x)
            samples.append(diagnostics.RangeSample(r=r, d=d, witness={}))
        ok, worst, _ = diagnostics.check_v_optimality(res.v, res.metric,
                                                      samples, 1e-8)
        assert ok, worst


class TestSampleCheck:
    def test_disjoint_positive_margin(self):
        inst = disks([-3.0, 0.0], [3.0, 0.0])
        out = ellipsoid.separate(inst, max_iter=10_000)
        worst = ellipsoid.sample_check_separation(inst, out, 500, seed=0)
        assert worst > 0

    def test_near_touching_small_positive_margin(self):
        gap = 1e-3
        inst = disks([-(1 + gap / 2), 0.0], [1 + gap / 2, 0.0])
        out = ellipsoid.separate(inst, max_iter=40_000)
        assert out.status == ellipsoid.SEPARATOR
        worst = ellipsoid.sample_check_separation(inst, out, 500, seed=0)
        assert 0 < worst < 0.1

    def test_swapped_normal_gives_negative_margin(self):
        inst = disks([-3.0, 0.0], [3.0, 0.0])
        out = ellipsoid.separate(inst, max_iter=10_000)
        flipped = ellipsoid.SeparationOutcome(
            status=ellipsoid.SEPARATOR, w=-out.w, s=out.s, t=out.t,
            s_prime=out.s_prime, margins_one=[], margins_two=[],
            v_dual=out.v_dual)
        worst = ellipsoid.sample_check_separation(inst, flipped, 500, seed=0)
        assert worst < 0

    def test_requires_separator(self):
        inst = disks([-0.5, 0.0], [0.5, 0.0])
        out = ellipsoid.separate(inst)
        with pytest.raises(ValueError):
            ellipsoid.sample_check_separation(inst, out, 10, seed=0)
