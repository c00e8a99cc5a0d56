"""Second fundamental forms at dual pairs and the checks built on them.

The form of M at p in a normal direction w is taken with the ambient
second derivative,

    II_w(X, Y) = < d^2 f(X, Y), w >,

evaluated through the parametrization; the same ambient (possibly
Lorentzian) inner product is used on both sides. The dual-side form uses
the dual map g and the normal direction p.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dualizer import DualCloud, DualPair, _frame_pivots, fiber_grid, resolve_grid, trace_dual
from .metric import (DEFAULT_TOL, MetricSpace, SubspaceBasis, gap_rank,
                     intersect, orthonormalize, span_residual)
from .patch import DEFAULT_FD_STEP, Jet2, ParamPatch, Sheet

NORMAL_TOL = 1e-9


class NotNormalError(ValueError):
    pass


@dataclass(frozen=True)
class FormMatrix:
    basis: SubspaceBasis
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        object.__setattr__(self, "entries", 0.5 * (a + a.T))


@dataclass(frozen=True)
class DecompositionReport:
    status: str                 # "PASS", "FAIL" or "excluded"
    dims: tuple
    ortho_residual: float
    span_residual: float
    blocks: tuple
    item_residuals: tuple = ()  # span residuals of items 1 and 2
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "PASS"


@dataclass(frozen=True)
class InverseDualityReport:
    status: str                 # "ok", "vacuous" or "excluded"
    A: FormMatrix = None
    A_dual: FormMatrix = None
    residual: float = float("nan")
    reason: str = ""


def first_form(ms: MetricSpace, jet: Jet2) -> np.ndarray:
    return ms.inner(jet.d1[:, None, :], jet.d1[None, :, :])


def _check_normal(ms, jet, w, tol=NORMAL_TOL):
    w = np.asarray(w, dtype=float)
    res = max(abs(float(ms.inner(w, jet.p))),
              float(np.max(np.abs(ms.inner(jet.d1, w)), initial=0.0)))
    if res > tol:
        raise NotNormalError(f"direction is not normal at this point (residual {res:.3g})")
    return w


def second_form(ms: MetricSpace, jet: Jet2, w) -> np.ndarray:
    """Coordinate matrix B_ij = <d2_ij f, w> for a normal direction w."""
    w = _check_normal(ms, jet, w)
    B = ms.inner(jet.d2, w)
    return 0.5 * (B + B.T)


def _coords(ms, jet, X, tol):
    """Jet coordinates c with d1^T c = X_i for rows X_i of the tangent span."""
    A = jet.d1.T
    if A.size == 0 or X.shape[0] == 0:
        if X.shape[0] and np.max(np.abs(X)) > tol:
            raise ValueError("vector outside the tangent span")
        return np.zeros((jet.nparams, X.shape[0]))
    sv = np.linalg.svd(A, compute_uv=False)
    rank, _, _ = gap_rank(sv)
    rcond = sv[rank - 1] * 1e-3 / sv[0] if rank else 1.0
    c, *_ = np.linalg.lstsq(A, X.T, rcond=rcond)
    res = np.max(np.abs(A @ c - X.T)) if X.size else 0.0
    if res > max(tol, 1e-8):
        raise ValueError(f"vector outside the tangent span (residual {res:.3g})")
    return c


def form_on_basis(ms: MetricSpace, jet: Jet2, w, X: SubspaceBasis, tol=DEFAULT_TOL) -> FormMatrix:
    """Matrix (II_w(X_i, X_j)) on an orthonormal family inside the tangent span."""
    B = second_form(ms, jet, w)
    c = _coords(ms, jet, X.vectors, tol)
    return FormMatrix(X, c.T @ B @ c)


def _radical(ms, jet, w, T: SubspaceBasis, tol):
    """(rad basis, stable) for II_w restricted to the orthonormal basis T."""
    if T.dim == 0:
        return ms.empty_basis(), True
    M = form_on_basis(ms, jet, w, T, tol).entries
    _, sv, vt = np.linalg.svd(M)
    rank, stable, _ = gap_rank(sv)
    kernel = vt[rank:] @ T.vectors
    return orthonormalize(ms, kernel, tol)[0], stable


def radical(G, B, d1, tol=DEFAULT_TOL, ms: MetricSpace = None) -> SubspaceBasis:
    """rad II = {X in T_p(M) : II(X, Y) = 0 for all Y}, as an orthonormal basis.

    ``G`` and ``B`` are the coordinate first and second forms and ``d1``
    the coordinate tangent vectors (rows). The kernel is taken in
    G-orthonormal coordinates so the rank decision does not depend on the
    parametrization speed.
    """
    d1 = np.atleast_2d(np.asarray(d1, dtype=float))
    ms = ms or MetricSpace(d1.shape[1])
    G = np.atleast_2d(G)
    B = np.atleast_2d(B)
    evals, evecs = np.linalg.eigh(G)
    keep = evals > max(evals.max(initial=0.0), 1.0) * 1e-12
    W = evecs[:, keep] / np.sqrt(evals[keep])      # G-orthonormal coordinates
    Bw = W.T @ B @ W
    _, sv, vt = np.linalg.svd(Bw) if Bw.size else (None, np.zeros(0), np.zeros((0, 0)))
    rank, _, _ = gap_rank(sv)
    kernel = (W @ vt[rank:].T).T @ d1
    return orthonormalize(ms, kernel, tol)[0]


def _ortho_blocks(ms, blocks):
    worst = 0.0
    for i in range(len(blocks)):
        for j in range(i + 1, len(blocks)):
            a, b = blocks[i].vectors, blocks[j].vectors
            if a.size and b.size:
                worst = max(worst, float(np.max(np.abs((a * ms.diag) @ b.T))))
    return worst


def _stack(ms, blocks):
    vecs = [b.vectors for b in blocks if b.dim]
    return SubspaceBasis(ms, np.vstack(vecs) if vecs else np.zeros((0, ms.ambient_dim)))


def decomposition_report(ms: MetricSpace, pair: DualPair, tol=1e-8,
                         rank_tol=DEFAULT_TOL) -> DecompositionReport:
    """Check the orthogonal decompositions at a generic pair.

    T_p = rad II + (T_p & T_q), T_q = rad II^v + (T_p & T_q), and
    L = Rp + rad II + (T_p & T_q) + rad II^v + Rq, all orthogonal direct sums.
    """
    if not pair.generic:
        return DecompositionReport("excluded", (), float("nan"), float("nan"), (),
                                   reason="rank-unstable pair")
    rad, ok_p = _radical(ms, pair.base_jet, pair.q, pair.Tp, rank_tol)
    rad_d, ok_q = _radical(ms, pair.dual_jet, pair.p, pair.Tq, rank_tol)
    if not (ok_p and ok_q):
        return DecompositionReport("excluded", (), float("nan"), float("nan"), (),
                                   reason="form rank is numerically ambiguous")
    shared = intersect(pair.Tp, pair.Tq, rank_tol)
    Rp = SubspaceBasis(ms, pair.p[None], orthonormal=True)
    Rq = SubspaceBasis(ms, pair.q[None], orthonormal=True)
    blocks = (Rp, rad, shared, rad_d, Rq)
    dims = tuple(b.dim for b in blocks)

    ortho = _ortho_blocks(ms, blocks)
    item1 = span_residual(ms, pair.Tp.vectors, _stack(ms, [rad, shared]))
    item2 = span_residual(ms, pair.Tq.vectors, _stack(ms, [rad_d, shared]))
    dims_ok = (rad.dim + shared.dim == pair.Tp.dim and rad_d.dim + shared.dim == pair.Tq.dim
               and sum(dims) == ms.ambient_dim)
    span = span_residual(ms, np.eye(ms.ambient_dim), _stack(ms, blocks))
    passed = dims_ok and max(ortho, item1, item2, span) <= tol
    return DecompositionReport("PASS" if passed else "FAIL", dims, ortho, span, blocks,
                               (item1, item2))


def inverse_duality(ms: MetricSpace, pair: DualPair, tol=DEFAULT_TOL) -> InverseDualityReport:
    """II on an orthonormal basis of T_p & T_q against II^v on the same basis."""
    if not pair.generic:
        return InverseDualityReport("excluded", reason="rank-unstable pair")
    X = intersect(pair.Tp, pair.Tq, tol)
    if X.dim == 0:
        return InverseDualityReport("vacuous", reason="T_p and T_q meet only in 0")
    A = form_on_basis(ms, pair.base_jet, pair.q, X)
    A_dual = form_on_basis(ms, pair.dual_jet, pair.p, X)
    residual = float(np.max(np.abs(A.entries @ A_dual.entries - np.eye(X.dim))))
    return InverseDualityReport("ok", A, A_dual, residual)


# ---------------------------------------------------------------------------
# biduality

def directed_hausdorff(a, b, chunk=2048) -> float:
    """max over a of the Euclidean distance to the nearest point of b (brute force)."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    if len(a) == 0:
        return 0.0
    if len(b) == 0:
        return float("inf")
    bb = np.sum(b * b, axis=1)
    worst = 0.0
    for i in range(0, len(a), chunk):
        x = a[i:i + chunk]
        d2 = np.sum(x * x, axis=1)[:, None] - 2 * x @ b.T + bb[None, :]
        near = np.argmin(d2, axis=1)
        # recompute the winners exactly; the expanded form loses digits
        d = np.linalg.norm(x - b[near], axis=1)
        worst = max(worst, float(d.max()))
    return worst


@dataclass(frozen=True)
class BidualReport:
    d_forward: float            # bidual sample -> target
    d_backward: float           # target -> bidual sample
    target: str                 # "M+tau(M)" or "M"
    d_antipodal: float = float("nan")   # tau(M) -> bidual sample (sphere only)
    n_bidual: int = 0
    n_target: int = 0
    dual_rank: int = 0
    bidual: np.ndarray = None

    def within(self, tol) -> bool:
        return self.d_forward <= tol and self.d_backward <= tol


def _dual_normals(ms, pairs, fiber_res, sheet):
    """Normal vectors of M^v at each q (all pairs share one dual rank)."""
    q = np.array([pr.q for pr in pairs])
    Tq = np.array([pr.Tq.vectors for pr in pairs]).reshape(len(pairs), -1, ms.ambient_dim)
    k = ms.ambient_dim - 1 - Tq.shape[1]
    _, normal, _ = _frame_pivots(q, Tq, ms.diag, k)     # (B, k, D)
    if sheet is Sheet.SPHERE:
        return np.einsum("fk,bkd->bfd", fiber_grid(k, fiber_res), normal).reshape(-1, ms.ambient_dim)
    if k != 1:
        raise NotImplementedError(
            f"hyperbolic biduality with a {k}-dimensional normal space of M^v")
    x = normal[:, 0]
    if np.any(ms.inner(x, x) >= 0):
        raise ValueError("normal line of M^v is not timelike")
    return x * np.sign(x[:, -1:])


def bidual_distance(patch: ParamPatch, grid=256, method="AD", h=DEFAULT_FD_STEP,
                    tol=DEFAULT_TOL, cloud: DualCloud = None) -> BidualReport:
    """One-sided Hausdorff distances between a sample of (M^v)^v and its target.

    The target is M together with its antipodal image on the sphere, and M
    alone on the hyperbolic sheet.
    """
    ms = patch.metric
    res, fiber_res = resolve_grid(grid, patch.param_dim, patch.codim)
    if cloud is None:
        cloud = trace_dual(patch, grid, method, h, tol)
    pairs = [pr for pr in cloud.pairs if pr.generic]
    if not pairs:
        raise ValueError("no rank-stable dual pairs to dualize")
    rank = cloud.generic_rank
    pairs = [pr for pr in pairs if pr.rank_q == rank]
    if rank == 0:
        # finite dual: dualize each distinct dual point once
        seen, uniq = set(), []
        for pr in pairs:
            key = tuple(np.round(pr.q, 9))
            if key not in seen:
                seen.add(key)
                uniq.append(pr)
        pairs = uniq
    pts = _dual_normals(ms, pairs, fiber_res, patch.sheet)

    M = patch(patch.grid(res))
    if patch.sheet is Sheet.SPHERE:
        target, label = np.vstack([M, -M]), "M+tau(M)"
        d_anti = directed_hausdorff(-M, pts)
    else:
        target, label = M, "M"
        d_anti = float("nan")
    return BidualReport(directed_hausdorff(pts, target), directed_hausdorff(target, pts),
                        label, d_anti, len(pts), len(target), rank, pts)
