"""Signature-aware dense linear algebra on the ambient space R^{N+1}.

Two geometries are supported: the Euclidean inner product, and the
Lorentzian one of signature (N, 1) with the *last* coordinate timelike::

    <x, y> = x_1 y_1 + ... + x_N y_N - x_{N+1} y_{N+1}

Subspaces are carried as :class:`SubspaceBasis` values whose vectors are
stored as rows.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-9

# singular-value gap used for every numerical rank decision
RANK_GAP = 1e6
RANK_FLOOR = 1e-13


class Signature(enum.Enum):
    EUCLIDEAN = "euclidean"
    LORENTZIAN = "lorentzian"


class IndefiniteSpanError(ValueError):
    """A Gram-Schmidt pivot hit a (numerically) null direction."""


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class MetricSpace:
    ambient_dim: int
    signature: Signature = Signature.EUCLIDEAN
    diag: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.ambient_dim) != self.ambient_dim or self.ambient_dim < 2:
            raise ValueError(f"ambient_dim must be an integer >= 2, got {self.ambient_dim}")
        signature = Signature(self.signature)
        object.__setattr__(self, "signature", signature)
        diag = np.ones(self.ambient_dim)
        if signature is Signature.LORENTZIAN:
            diag[-1] = -1.0
        diag.setflags(write=False)
        object.__setattr__(self, "diag", diag)

    @property
    def N(self) -> int:
        return self.ambient_dim - 1

    @property
    def lorentzian(self) -> bool:
        return self.signature is Signature.LORENTZIAN

    def inner(self, x, y):
        """Inner product along the last axis; broadcasts over leading axes."""
        return inner(self, x, y)

    def full_basis(self) -> "SubspaceBasis":
        return SubspaceBasis(self, np.eye(self.ambient_dim), orthonormal=True)

    def empty_basis(self) -> "SubspaceBasis":
        return SubspaceBasis(self, np.zeros((0, self.ambient_dim)), orthonormal=True)


@dataclass(frozen=True)
class SubspaceBasis:
    metric: MetricSpace
    vectors: np.ndarray
    orthonormal: bool = False

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=float).reshape(-1, self.metric.ambient_dim)
        if not np.all(np.isfinite(vecs)):
            raise ValueError("basis vectors must be finite")
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    def __len__(self):
        return self.dim

    def gram(self) -> np.ndarray:
        return (self.vectors * self.metric.diag) @ self.vectors.T

    @property
    def signs(self) -> np.ndarray:
        return np.sign(np.diag(self.gram()))


def _check_vector(ms: MetricSpace, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != ms.ambient_dim:
        raise DimensionError(f"expected vectors of length {ms.ambient_dim}, got shape {x.shape}")
    return x


def inner(ms: MetricSpace, x, y):
    x = _check_vector(ms, x)
    y = _check_vector(ms, y)
    return np.sum(x * y * ms.diag, axis=-1)


def gap_rank(singular_values, gap: float = RANK_GAP, floor: float = RANK_FLOOR):
    """Numerical rank from the largest singular-value gap.

    The sorted values are padded with a unit-scale reference in front and a
    floor behind, so an all-zero spectrum has rank 0. Returns
    ``(rank, stable, ratio)``; ``stable`` means exactly one consecutive
    ratio reaches ``gap``, i.e. the rank decision is unambiguous.
    """
    sv = np.sort(np.abs(np.asarray(singular_values, dtype=float)))[::-1]
    scale = max(1.0, float(sv[0])) if sv.size else 1.0
    lo = floor * scale
    padded = np.concatenate([[scale], np.maximum(sv, lo), [lo]])
    ratios = padded[:-1] / padded[1:]
    rank = int(np.argmax(ratios))
    stable = int(np.count_nonzero(ratios >= gap)) == 1
    return rank, stable, float(ratios[rank])


def _pivoted_gs(ms, candidates, tol, seed=(), max_count=None):
    """Modified Gram-Schmidt, pivoting on the largest Euclidean residual.

    ``seed`` is an already orthonormal list of vectors that the candidates
    are orthogonalized against but which is not returned. Returns the new
    basis vectors, their signs and the candidate indices in pivot order.
    """
    dim = ms.ambient_dim
    diag = ms.diag
    cand = np.array(candidates, dtype=float).reshape(-1, dim)
    seed = [np.asarray(b, dtype=float) for b in seed]
    seed_signs = [1.0 if (b * diag) @ b > 0 else -1.0 for b in seed]
    resid = cand.copy()
    for _ in range(2):
        for b, s in zip(seed, seed_signs):
            resid -= s * np.outer(resid @ (b * diag), b)

    basis, signs, pivots = [], [], []
    remaining = list(range(len(cand)))
    while remaining and (max_count is None or len(basis) < max_count):
        norms = np.sqrt(np.einsum("ij,ij->i", resid[remaining], resid[remaining]))
        j = int(np.argmax(norms))
        if norms[j] < tol:
            break
        idx = remaining.pop(j)
        r = resid[idx]
        for b, s in zip(seed + basis, seed_signs + signs):
            r = r - s * ((r * diag) @ b) * b
        sp = float((r * diag) @ r)
        if abs(sp) < tol * tol:
            raise IndefiniteSpanError(
                f"null direction in span (self-product {sp:.3g}, residual norm {norms[j]:.3g})")
        b = r / np.sqrt(abs(sp))
        s = 1.0 if sp > 0 else -1.0
        basis.append(b)
        signs.append(s)
        pivots.append(idx)
        if remaining:
            resid[remaining] -= s * np.outer(resid[remaining] @ (b * diag), b)
    return basis, signs, pivots


def orthonormalize(ms: MetricSpace, vectors, tol: float = DEFAULT_TOL):
    """Orthonormalize ``vectors`` under the metric of ``ms``.

    Parameters
    ----------
    ms : MetricSpace
    vectors : array_like
        (n, ambient_dim) array, one vector per row; may be empty.
    tol : float
        Residual norms below ``tol`` count as linearly dependent.

    Returns
    -------
    basis : SubspaceBasis
        Orthonormal basis in pivot order; self-products are +1 or -1.
    rank : int

    Raises
    ------
    IndefiniteSpanError
        If a residual of norm >= tol has self-product below tol**2.
    """
    basis, _, _ = _pivoted_gs(ms, vectors, tol)
    return SubspaceBasis(ms, np.array(basis).reshape(-1, ms.ambient_dim), orthonormal=True), len(basis)


def _as_orthonormal(ms, basis: SubspaceBasis, tol):
    if basis.metric.ambient_dim != ms.ambient_dim:
        raise DimensionError("basis lives in a different ambient space")
    if basis.orthonormal:
        return basis
    return orthonormalize(ms, basis.vectors, tol)[0]


def _project_rows(ms, rows, basis: SubspaceBasis):
    coef = ms.inner(rows[:, None, :], basis.vectors[None, :, :]) * basis.signs
    return coef @ basis.vectors


def complement_within(ms: MetricSpace, enclosing: SubspaceBasis, span: SubspaceBasis,
                      tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """Orthonormal basis of the metric complement of ``span`` inside ``enclosing``."""
    return _complement(ms, enclosing, span, tol)[0]


def _complement(ms, enclosing, span, tol):
    enclosing = _as_orthonormal(ms, enclosing, tol)
    span = _as_orthonormal(ms, span, tol)
    if span.dim:
        if enclosing.dim == 0:
            raise ValueError("span is not contained in the enclosing subspace")
        res = span.vectors - _project_rows(ms, span.vectors, enclosing)
        if np.max(np.abs(res)) > 10 * tol:
            raise ValueError("span is not contained in the enclosing subspace "
                             f"(residual {np.max(np.abs(res)):.3g})")
    basis, _, pivots = _pivoted_gs(ms, enclosing.vectors, tol, seed=list(span.vectors),
                                   max_count=enclosing.dim - span.dim)
    out = SubspaceBasis(ms, np.array(basis).reshape(-1, ms.ambient_dim), orthonormal=True)
    return out, pivots


def _range(rows, tol):
    # Euclidean orthonormal columns spanning the rows; tolerates dependent rows
    u, sv, _ = np.linalg.svd(rows.T, full_matrices=False)
    scale = sv[0] if sv.size else 0.0
    return u[:, sv > tol * max(scale, 1.0)]


def intersect(a: SubspaceBasis, b: SubspaceBasis, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """Intersection of two subspaces through their principal angles.

    Directions whose principal-angle cosine is at least ``1 - tol`` are
    kept. The cosines are the singular values of ``Qa^T Qb`` for Euclidean
    orthonormal bases ``Qa``, ``Qb``; the intersection itself does not
    depend on the metric, only the returned basis is metric-orthonormal.
    """
    ms = a.metric
    if b.metric.ambient_dim != ms.ambient_dim:
        raise DimensionError("subspaces live in different ambient spaces")
    if a.dim == 0 or b.dim == 0:
        return ms.empty_basis()
    qa, qb = _range(a.vectors, tol), _range(b.vectors, tol)
    if qa.shape[1] == 0 or qb.shape[1] == 0:
        return ms.empty_basis()
    u, sv, _ = np.linalg.svd(qa.T @ qb)
    keep = sv >= 1.0 - tol
    dirs = (qa @ u[:, :len(sv)][:, keep]).T
    return orthonormalize(ms, dirs, tol)[0]


def project(ms: MetricSpace, v, basis: SubspaceBasis):
    """Metric-orthogonal projection of ``v`` onto an orthonormal basis."""
    v = _check_vector(ms, v)
    if basis.dim and not np.allclose(basis.gram(), np.diag(basis.signs), atol=1e-8):
        raise ValueError("project needs an orthonormal basis")
    if basis.dim == 0:
        return np.zeros_like(v)
    rows = np.atleast_2d(v)
    out = _project_rows(ms, rows, basis)
    return out.reshape(v.shape)


def span_residual(ms: MetricSpace, rows, basis: SubspaceBasis) -> float:
    """Largest Euclidean distance from ``rows`` to the span of ``basis``.

    Uses a least-squares fit, so ``basis`` need not be orthogonal.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size == 0:
        return 0.0
    if basis.dim == 0:
        return float(np.max(np.linalg.norm(rows, axis=1)))
    coef, *_ = np.linalg.lstsq(basis.vectors.T, rows.T, rcond=None)
    res = rows.T - basis.vectors.T @ coef
    return float(np.max(np.linalg.norm(res, axis=0)))
