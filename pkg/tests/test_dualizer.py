import math

import numpy as np
import pytest

import oracles
from dualform.catalog import CATALOG, builtin, clifford_torus, great_circle, small_circle
from dualform.dualizer import (FiberChart, FrameDiscontinuityError, NonSmoothError, antipode,
                               chart_to_fiber, dual_jet2, dual_pairs, dual_point, fiber_chart,
                               fiber_grid, generic_dual_dimension, normal_frame, sample_dual,
                               trace_dual, DualCloud)
from dualform.expr import parse
from dualform.metric import MetricSpace
from dualform.patch import ParamPatch, eval_jet2


def up_to_sign(a, b, atol):
    a, b = np.asarray(a), np.asarray(b)
    return min(np.max(np.abs(a - b)), np.max(np.abs(a + b))) <= atol


class TestNormalFrame:
    @pytest.mark.parametrize("t", [0.0, 1.0, 4.0])
    def test_equator(self, t):
        patch = great_circle()
        fr = normal_frame(patch.metric, eval_jet2(patch, [t]))
        assert up_to_sign(fr.n[0], [0, 0, 1], 1e-15)

    def test_small_circle(self):
        patch = small_circle(0.6)
        fr = normal_frame(patch.metric, eval_jet2(patch, [0.0]))
        assert up_to_sign(fr.n[0], [0.8, 0, -0.6], 1e-15)

    def test_hyperbolic_circle(self):
        patch = builtin("hyperbolic_circle", [0.6])
        fr = normal_frame(patch.metric, eval_jet2(patch, [0.0]))
        assert up_to_sign(fr.n[0], [math.sqrt(1.36), 0, 0.6], 1e-15)
        assert patch.metric.inner(fr.n[0], fr.n[0]) == pytest.approx(1, abs=1e-14)

    def test_orthonormal_in_s5(self):
        patch = builtin("random_trig_curve", [3, 3, 6])
        ms = patch.metric
        jet = eval_jet2(patch, [1.3])
        fr = normal_frame(ms, jet)
        assert fr.k == 4
        assert np.max(np.abs(ms.inner(fr.n, jet.p))) <= 1e-9
        assert np.max(np.abs(fr.n @ jet.d1.T)) <= 1e-9
        assert np.max(np.abs(fr.n @ fr.n.T - np.eye(4))) <= 1e-9

    def test_non_smooth(self):
        exprs, _ = parse("(0*t + 1, 0, 0)")
        patch = ParamPatch(MetricSpace(3), ["t"], [(0, 1)], exprs)
        with pytest.raises(NonSmoothError):
            normal_frame(patch.metric, eval_jet2(patch, [0.5]))


class TestDualPoint:
    def test_equator_both_signs(self):
        patch = great_circle()
        fr = normal_frame(patch.metric, eval_jet2(patch, [0.3]))
        assert up_to_sign(dual_point(fr, [1]), [0, 0, 1], 1e-15)
        np.testing.assert_allclose(dual_point(fr, [-1]), -dual_point(fr, [1]))

    def test_small_circle(self):
        patch = small_circle(0.6)
        fr = normal_frame(patch.metric, eval_jet2(patch, [0.0]))
        np.testing.assert_allclose(dual_point(fr, [1]), oracles.small_circle(0.6, 0.0)["q"],
                                   atol=1e-15)

    def test_clifford(self):
        patch = clifford_torus()
        fr = normal_frame(patch.metric, eval_jet2(patch, [0.0, 0.0]))
        np.testing.assert_allclose(dual_point(fr, [1]), np.array([1, 0, -1, 0]) / math.sqrt(2),
                                   atol=1e-15)

    def test_non_unit(self):
        patch = great_circle()
        fr = normal_frame(patch.metric, eval_jet2(patch, [0.3]))
        with pytest.raises(ValueError, match="unit"):
            dual_point(fr, [0.5])


class TestFiberCharts:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        for k in (2, 3, 4):
            s = rng.normal(size=k)
            s /= np.linalg.norm(s)
            c = fiber_chart(s)
            assert np.linalg.norm(c.y) <= 1 + 1e-15
            np.testing.assert_allclose(c.point(), s, atol=1e-15)

    def test_grid_unit(self):
        g = fiber_grid(3, 6)
        np.testing.assert_allclose(np.linalg.norm(g, axis=1), 1, atol=1e-15)
        assert fiber_grid(1, 9).tolist() == [[1.0], [-1.0]]

    def test_chart_formula(self):
        np.testing.assert_allclose(chart_to_fiber(-1, [0.0]), [0, -1])


class TestDualJet:
    @pytest.mark.parametrize("t", [0.0, 0.7, 2.5])
    def test_small_circle(self, t):
        ref = oracles.small_circle(0.6, t)
        j = dual_jet2(small_circle(0.6), [t], FiberChart(1))
        # the frame orientation is per chart; value and derivatives flip together
        sign = np.sign(j.p @ ref["q"])
        np.testing.assert_allclose(sign * j.p, ref["q"], atol=1e-15)
        np.testing.assert_allclose(sign * j.d1[0], ref["g1"], atol=1e-15)
        np.testing.assert_allclose(sign * j.d2[0, 0], ref["g2"], atol=1e-14)

    def test_clifford_closed_form(self):
        u, v = 0.4, 2.0
        j = dual_jet2(clifford_torus(), [u, v], FiberChart(1))
        g = np.array([math.cos(u), math.sin(u), -math.cos(v), -math.sin(v)]) / math.sqrt(2)
        np.testing.assert_allclose(j.p, g, atol=1e-15)
        ref = oracles.clifford(u, v)
        np.testing.assert_allclose(j.d2[0, 0], ref["fuu"], atol=1e-14)

    def test_equator_constant(self):
        j = dual_jet2(great_circle(), [1.1], FiberChart(1))
        np.testing.assert_allclose(j.p, [0, 0, 1], atol=1e-15)
        assert np.max(np.abs(j.d1)) <= 1e-15

    def test_fd_close_to_ad(self):
        patch = builtin("random_trig_curve", [5, 2, 4])
        chart = fiber_chart(np.array([0.6, 0.8]))
        a = dual_jet2(patch, [1.0], chart)
        f = dual_jet2(patch, [1.0], chart, "FD", 1e-3)
        assert np.max(np.abs(a.d1 - f.d1)) <= 1e-4

    def test_frozen_pivot_degenerates(self):
        # at t = 0 the y axis is the tangent direction, useless as a frame seed
        with pytest.raises(FrameDiscontinuityError):
            dual_jet2(small_circle(0.6), [0.0], FiberChart(1), pivots=[1])

    def test_frozen_pivot_accepted(self):
        j = dual_jet2(small_circle(0.6), [0.0], FiberChart(1), pivots=[0])
        np.testing.assert_allclose(j.p, [0.8, 0, -0.6], atol=1e-15)


class TestTrace:
    def test_equator(self):
        cloud = trace_dual(great_circle(), 360)
        assert len(cloud.pairs) == 720
        q = cloud.q_array()
        assert np.max(np.abs(np.abs(q) - [0, 0, 1])) <= 1e-12
        assert generic_dual_dimension(cloud)[0] == 0
        assert generic_dual_dimension(cloud)[1] >= 0.99

    def test_small_circle(self):
        cloud = trace_dual(small_circle(0.6), 360)
        assert len(cloud.pairs) == 720
        q = cloud.q_array()
        np.testing.assert_allclose(np.hypot(q[:, 0], q[:, 1]), 0.8, atol=1e-14)
        np.testing.assert_allclose(np.sort(np.unique(np.round(q[:, 2], 12))), [-0.6, 0.6])
        dim, frac = generic_dual_dimension(cloud)
        assert dim == 1 and frac >= 0.99

    def test_clifford(self):
        cloud = trace_dual(clifford_torus(), 64)
        q = cloud.q_array()
        assert len(q) == 64 * 64 * 2
        np.testing.assert_allclose(q[:, 0] ** 2 + q[:, 1] ** 2, 0.5, atol=1e-14)
        np.testing.assert_allclose(q[:, 2] ** 2 + q[:, 3] ** 2, 0.5, atol=1e-14)
        dim, frac = generic_dual_dimension(cloud)
        assert dim == 2 and frac >= 0.99

    def test_row_order(self):
        cloud = trace_dual(small_circle(0.6), 4)
        assert [pr.s[0] for pr in cloud.pairs] == [1, -1] * 4
        assert [pr.u[0] for pr in cloud.pairs][::2] == pytest.approx(
            np.linspace(0, 2 * math.pi, 4, endpoint=False))

    def test_skips_non_smooth(self):
        # speed vanishes at t = 0 where sin(t)^2 has a critical point
        exprs, _ = parse("(cos(sin(t)^2), sin(sin(t)^2), 0)")
        patch = ParamPatch(MetricSpace(3), ["t"], [(-1, 1)], exprs)
        cloud = trace_dual(patch, 5)
        assert cloud.skipped == 2 and len(cloud.pairs) == 8

    def test_deterministic(self, monkeypatch):
        patch = builtin("random_trig_curve", [2, 3, 5])
        monkeypatch.setattr("dualform.dualizer.CHUNK", 7)
        a = trace_dual(patch, [16, 4])
        monkeypatch.setenv("DUALFORM_THREADS", "4")
        b = trace_dual(patch, [16, 4])
        assert np.array_equal(a.q_array(), b.q_array())
        assert [pr.rank_q for pr in a.pairs] == [pr.rank_q for pr in b.pairs]

    def test_codim_zero(self):
        patch = ParamPatch(MetricSpace(3), ["a", "b"], [(0, 1), (0, 1)],
                           parse("(cos(a)*cos(b), sin(a)*cos(b), sin(b))")[0])
        with pytest.raises(ValueError, match="codimension"):
            trace_dual(patch, 4)


class TestPairInvariants:
    @pytest.mark.parametrize("name", sorted(CATALOG))
    def test_conditions(self, name):
        patch = builtin(name)
        ms = patch.metric
        for pr in sample_dual(patch, 30, seed=1).pairs:
            assert ms.inner(pr.q, pr.q) == pytest.approx(1, abs=1e-9)
            assert abs(ms.inner(pr.q, pr.p)) <= 1e-9
            assert np.max(np.abs(ms.inner(pr.Tp.vectors, pr.q))) <= 1e-9
            if pr.Tq.dim:
                assert np.max(np.abs(ms.inner(pr.Tq.vectors, pr.p))) <= 1e-8

    def test_hyperbolic_dual_not_on_sheet(self):
        patch = builtin("hyperbolic_circle", [0.6])
        q = trace_dual(patch, 50).q_array()
        np.testing.assert_allclose(patch.metric.inner(q, q), 1, atol=1e-12)

    def test_dual_dimension_bound(self):
        patch = builtin("random_trig_curve", [1, 3, 5])
        cloud = sample_dual(patch, 40)
        assert all(pr.rank_q <= patch.metric.N - 1 for pr in cloud.pairs)

    def test_explicit_pairs(self):
        patch = small_circle(0.6)
        cloud = dual_pairs(patch, [[0.0], [0.0]], [[1.0], [-1.0]])
        np.testing.assert_allclose(cloud.pairs[0].q, -cloud.pairs[1].q)
        with pytest.raises(ValueError, match="unit"):
            dual_pairs(patch, [[0.0]], [[2.0]])


def test_empty_cloud_dimension():
    with pytest.raises(ValueError, match="empty"):
        generic_dual_dimension(DualCloud([]))


class TestAntipode:
    def test_pole(self):
        np.testing.assert_array_equal(antipode([0, 0, 1]), [0, 0, -1])

    def test_involution_and_norm(self):
        rng = np.random.default_rng(6)
        ms = MetricSpace(4)
        for q in rng.normal(size=(20, 4)):
            np.testing.assert_array_equal(antipode(antipode(q)), q)
            assert ms.inner(antipode(q), antipode(q)) == ms.inner(q, q)
