"""Randomized invariants of the linear algebra and of dual pairs."""

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dualform.catalog import random_trig_curve
from dualform.curvature import decomposition_report, inverse_duality
from dualform.dualizer import dual_pairs
from dualform.metric import (IndefiniteSpanError, MetricSpace, Signature, SubspaceBasis,
                             complement_within, intersect, orthonormalize, project,
                             span_residual)

TOL = 1e-9
unit_floats = st.floats(-1, 1, allow_nan=False, allow_subnormal=False)


def vectors(n, dim):
    return arrays(np.float64, (n, dim), elements=unit_floats)


@st.composite
def vector_sets(draw):
    dim = draw(st.integers(2, 6))
    n = draw(st.integers(1, dim + 1))
    return dim, draw(vectors(n, dim))


@settings(max_examples=150, deadline=None)
@given(vector_sets())
def test_orthonormalize_euclidean(data):
    dim, vecs = data
    ms = MetricSpace(dim)
    b, rank = orthonormalize(ms, vecs, TOL)
    assert rank <= min(len(vecs), dim)
    if rank:
        assert np.max(np.abs(b.gram() - np.eye(rank))) <= 10 * TOL
    assert span_residual(ms, vecs, b) <= 10 * TOL


@settings(max_examples=150, deadline=None)
@given(vector_sets())
def test_orthonormalize_spacelike_lorentzian(data):
    # vectors with zero time component span a definite subspace
    dim, vecs = data
    vecs = vecs.copy()
    vecs[:, -1] = 0.0
    ms = MetricSpace(dim, Signature.LORENTZIAN)
    b, rank = orthonormalize(ms, vecs, TOL)
    if rank:
        assert np.all(b.signs == 1)
        assert np.max(np.abs(b.gram() - np.eye(rank))) <= 10 * TOL
    assert span_residual(ms, vecs, b) <= 10 * TOL


@settings(max_examples=100, deadline=None)
@given(vector_sets(), st.integers(0, 3))
def test_complement_dimensions(data, extra):
    dim, vecs = data
    ms = MetricSpace(dim)
    enclosing, r = orthonormalize(ms, vecs, TOL)
    assume(r >= 1)
    span = SubspaceBasis(ms, enclosing.vectors[: min(extra, r)], orthonormal=True)
    comp = complement_within(ms, enclosing, span, TOL)
    assert comp.dim + span.dim == enclosing.dim
    if comp.dim and span.dim:
        assert np.max(np.abs(comp.vectors @ span.vectors.T)) <= 10 * TOL


@settings(max_examples=100, deadline=None)
@given(vector_sets(), arrays(np.float64, (6,), elements=unit_floats))
def test_project_idempotent(data, v):
    dim, vecs = data
    ms = MetricSpace(dim)
    b, r = orthonormalize(ms, vecs, TOL)
    once = project(ms, v[:dim], b)
    assert np.linalg.norm(project(ms, once, b) - once) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 6).flatmap(lambda d: st.tuples(st.just(d), vectors(3, d), vectors(2, d))))
def test_intersection_inside_both(data):
    dim, shared, extra = data
    ms = MetricSpace(dim)
    a = SubspaceBasis(ms, np.vstack([shared[:2], extra[:1]]))
    b = SubspaceBasis(ms, np.vstack([shared[:2] @ np.eye(dim), extra[1:]]))
    x = intersect(a, b, TOL)
    if x.dim:
        assert span_residual(ms, x.vectors, a) <= 1e-6
        assert span_residual(ms, x.vectors, b) <= 1e-6


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(-6, 6), st.booleans())
def test_null_vectors_rejected(m, n, e, swap):
    # Pythagorean triples scaled by powers of two are exactly null
    assume(m != n)
    a, b, c = abs(m * m - n * n), 2 * m * n, m * m + n * n
    if swap:
        a, b = b, a
    null = np.array([a, b, c], dtype=float) * 2.0 ** e
    ms = MetricSpace(3, Signature.LORENTZIAN)
    try:
        orthonormalize(ms, [null], TOL)
    except IndefiniteSpanError:
        return
    raise AssertionError("a null vector was orthonormalized")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.floats(0, 2 * np.pi),
       st.floats(0, 2 * np.pi))
def test_random_curve_pairs(seed, degree, t, angle):
    patch = random_trig_curve(seed, degree, 4)
    ms = patch.metric
    s = np.array([[np.cos(angle), np.sin(angle)]])
    cloud = dual_pairs(patch, [[t]], s)
    assume(cloud.pairs)
    pr = cloud.pairs[0]
    assert abs(ms.inner(pr.q, pr.p)) <= 1e-9
    assert np.max(np.abs(pr.Tp.vectors @ pr.q)) <= 1e-9
    if pr.Tq.dim:
        assert np.max(np.abs(pr.Tq.vectors @ pr.p)) <= 1e-8
    rep = decomposition_report(ms, pr)
    if rep.status != "excluded":
        assert rep.status == "PASS" and sum(rep.dims) == 4
    flipped = dual_pairs(patch, [[t]], -s).pairs[0]
    a, b = inverse_duality(ms, pr), inverse_duality(ms, flipped)
    assert a.status == b.status
    if a.status == "ok" and a.residual <= 1e-6 and b.residual <= 1e-6:
        np.testing.assert_allclose(a.A.entries @ a.A_dual.entries,
                                   b.A.entries @ b.A_dual.entries, atol=1e-6)
