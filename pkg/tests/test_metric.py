import numpy as np
import pytest

from dualform.metric import (DimensionError, IndefiniteSpanError, MetricSpace, Signature,
                             SubspaceBasis, complement_within, gap_rank, inner, intersect,
                             orthonormalize, project, span_residual)

E3 = MetricSpace(3)
L3 = MetricSpace(3, Signature.LORENTZIAN)


def span_of(ms, *rows):
    return SubspaceBasis(ms, np.array(rows, dtype=float))


def same_span(a: SubspaceBasis, b: SubspaceBasis) -> bool:
    return a.dim == b.dim and span_residual(a.metric, a.vectors, b) < 1e-12 \
        and span_residual(b.metric, b.vectors, a) < 1e-12


class TestMetricSpace:
    def test_rejects_tiny_dimension(self):
        with pytest.raises(ValueError):
            MetricSpace(1)

    def test_lorentzian_diag(self):
        assert L3.diag.tolist() == [1.0, 1.0, -1.0]
        assert L3.N == 2 and L3.lorentzian

    def test_diag_read_only(self):
        with pytest.raises(ValueError):
            E3.diag[0] = 5.0


class TestInner:
    def test_euclidean_unit(self):
        assert inner(E3, [1, 0, 0], [1, 0, 0]) == 1

    def test_timelike_axis(self):
        assert inner(L3, [0, 0, 1], [0, 0, 1]) == -1

    def test_lorentzian_expansion(self):
        assert inner(L3, [1, 0, 1], [0, 1, 1]) == -1

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            inner(E3, [1, 0], [1, 0, 0])

    def test_bilinear_symmetric(self):
        rng = np.random.default_rng(3)
        x, y, z = rng.normal(size=(3, 3))
        a, b = 0.7, -1.9
        for ms in (E3, L3):
            assert inner(ms, x, y) == pytest.approx(inner(ms, y, x), abs=1e-15)
            lhs = inner(ms, a * x + b * z, y)
            assert lhs == pytest.approx(a * inner(ms, x, y) + b * inner(ms, z, y), abs=1e-13)


class TestGapRank:
    def test_zero_spectrum(self):
        assert gap_rank([0.0, 0.0])[:2] == (0, True)

    def test_clear_gap(self):
        assert gap_rank([2.0, 1.0, 1e-14])[:2] == (2, True)

    def test_ambiguous(self):
        rank, stable, _ = gap_rank([1.0, 10 ** -6.5, 0.0])
        assert not stable

    def test_empty(self):
        assert gap_rank([])[:2] == (0, True)


class TestOrthonormalize:
    def test_scaling(self):
        b, rank = orthonormalize(E3, [[2, 0, 0]])
        assert rank == 1
        np.testing.assert_allclose(b.vectors, [[1, 0, 0]])

    def test_two_vectors(self):
        b, rank = orthonormalize(E3, [[1, 0, 0], [1, 1, 0]])
        assert rank == 2
        np.testing.assert_allclose(b.gram(), np.eye(2), atol=1e-15)
        # pivoting may pick (1,1,0) first; the span is what is fixed
        assert same_span(b, span_of(E3, [1, 0, 0], [0, 1, 0]))

    def test_dependent(self):
        _, rank = orthonormalize(E3, [[1, 0, 0], [2, 0, 0]], tol=1e-10)
        assert rank == 1

    def test_empty_input(self):
        b, rank = orthonormalize(E3, np.zeros((0, 3)))
        assert rank == 0 and b.dim == 0

    def test_null_direction_raises(self):
        with pytest.raises(IndefiniteSpanError):
            orthonormalize(L3, [[1, 0, 1]])

    def test_lorentzian_timelike(self):
        b, _ = orthonormalize(L3, [[0, 0, 2], [1, 0, 0]])
        np.testing.assert_allclose(np.sort(b.signs), [-1, 1])

    def test_random_sets(self):
        rng = np.random.default_rng(11)
        tol = 1e-9
        for n in range(1, 6):
            vecs = rng.normal(size=(n, 5))
            b, rank = orthonormalize(MetricSpace(5), vecs, tol)
            assert rank == min(n, 5)
            assert np.max(np.abs(b.gram() - np.eye(rank))) <= 10 * tol
            assert span_residual(b.metric, vecs, b) <= 10 * tol


class TestComplement:
    def test_plane(self):
        c = complement_within(E3, E3.full_basis(), span_of(E3, [0, 0, 1]))
        assert same_span(c, span_of(E3, [1, 0, 0], [0, 1, 0]))

    def test_enclosing_equals_span(self):
        s = span_of(E3, [1, 2, 0], [0, 1, 1])
        assert complement_within(E3, s, s).dim == 0

    def test_lorentzian_timelike_axis(self):
        c = complement_within(L3, L3.full_basis(), span_of(L3, [0, 0, 1]))
        assert same_span(c, span_of(L3, [1, 0, 0], [0, 1, 0]))
        assert c.signs.tolist() == [1.0, 1.0]

    def test_not_contained(self):
        with pytest.raises(ValueError):
            complement_within(E3, span_of(E3, [1, 0, 0]), span_of(E3, [0, 1, 0]))

    def test_dimensions_add(self):
        rng = np.random.default_rng(5)
        ms = MetricSpace(6)
        enc, _ = orthonormalize(ms, rng.normal(size=(4, 6)))
        sub, _ = orthonormalize(ms, enc.vectors[:2] + 0.3 * enc.vectors[2:4])
        c = complement_within(ms, enc, sub)
        assert c.dim + sub.dim == enc.dim
        assert np.max(np.abs(c.vectors @ sub.vectors.T)) < 1e-12


class TestIntersect:
    def test_shared_axis(self):
        x = intersect(span_of(E3, [1, 0, 0], [0, 1, 0]), span_of(E3, [0, 1, 0], [0, 0, 1]))
        assert same_span(x, span_of(E3, [0, 1, 0]))

    def test_identity(self):
        a = span_of(E3, [1, 1, 0], [0, 1, 1])
        assert same_span(intersect(a, a), a)

    def test_disjoint(self):
        assert intersect(span_of(E3, [1, 0, 0]), span_of(E3, [0, 1, 0])).dim == 0

    def test_contained_in_both(self):
        rng = np.random.default_rng(2)
        ms = MetricSpace(5)
        common = rng.normal(size=(2, 5))
        a = SubspaceBasis(ms, np.vstack([common, rng.normal(size=(1, 5))]))
        b = SubspaceBasis(ms, np.vstack([np.array([[1, 2], [0, 1]]) @ common,
                                         rng.normal(size=(1, 5))]))
        x = intersect(a, b)
        assert x.dim == 2
        assert span_residual(ms, x.vectors, a) < 1e-9
        assert span_residual(ms, x.vectors, b) < 1e-9


class TestProject:
    def test_onto_axis(self):
        e1 = SubspaceBasis(E3, [[1, 0, 0]], orthonormal=True)
        np.testing.assert_allclose(project(E3, [1, 2, 3], e1), [1, 0, 0])

    def test_in_span_fixed(self):
        b, _ = orthonormalize(E3, [[1, 1, 0], [0, 1, 1]])
        v = 2 * b.vectors[0] - b.vectors[1]
        np.testing.assert_allclose(project(E3, v, b), v, atol=1e-14)

    def test_lorentzian_sign_cancels(self):
        b = SubspaceBasis(L3, [[0, 0, 1]], orthonormal=True)
        np.testing.assert_allclose(project(L3, [0, 0, 5], b), [0, 0, 5])

    def test_needs_orthonormal(self):
        with pytest.raises(ValueError):
            project(E3, [1, 0, 0], SubspaceBasis(E3, [[2, 0, 0]]))

    def test_idempotent(self):
        rng = np.random.default_rng(8)
        b, _ = orthonormalize(MetricSpace(4), rng.normal(size=(2, 4)))
        v = rng.normal(size=4)
        once = project(b.metric, v, b)
        assert np.linalg.norm(project(b.metric, once, b) - once) <= 1e-12
