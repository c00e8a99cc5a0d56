"""Normal frames, the dual variety M^v and corresponding dual pairs (p, q).

The dual variety is parametrized near a smooth point by

    g(u, y) = sum_j s_j(y) n_j(u)

where ``n_1..n_k`` is the normal frame of M in S at f(u) and ``s(y)`` is a
stereographic chart of the fiber sphere S^{k-1}. The frame comes from
Gram-Schmidt on ``[f, df/du_1, ..., df/du_m]`` followed by coordinate axes
in a pivot order frozen at the base point; running the same arithmetic on
Taylor values differentiates through it exactly.
"""

from __future__ import annotations

import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .metric import DEFAULT_TOL, MetricSpace, SubspaceBasis, gap_rank, orthonormalize
from .patch import DEFAULT_FD_STEP, Jet2, ParamPatch, _jets_from_taylor, ad_jets, fd_jets
from .taylor import Taylor

CHUNK = 2048
# frozen pivots whose residual norm falls below this are badly conditioned
PIVOT_FLOOR = 1e-3


class NonSmoothError(ValueError):
    pass


class FrameDiscontinuityError(ValueError):
    """The frozen pivot order is not usable at this point; re-chart."""


@dataclass(frozen=True)
class NormalFrame:
    base: Jet2
    n: np.ndarray
    pivots: tuple

    @property
    def k(self) -> int:
        return self.n.shape[0]


@dataclass(frozen=True)
class FiberChart:
    """Stereographic chart of S^{k-1}: ``pole`` is +1 or -1, ``y`` in R^{k-1}."""

    pole: int
    y: tuple = ()

    def point(self) -> np.ndarray:
        return chart_to_fiber(self.pole, np.asarray(self.y, dtype=float))


@dataclass(frozen=True)
class DualPair:
    u: np.ndarray
    s: np.ndarray
    p: np.ndarray
    q: np.ndarray
    Tp: SubspaceBasis
    Tq: SubspaceBasis
    rank_q: int
    generic: bool
    base_jet: Jet2
    dual_jet: Jet2
    chart: FiberChart
    gap_q: float = float("inf")


@dataclass
class DualCloud:
    pairs: list
    metadata: dict = field(default_factory=dict)
    skipped: int = 0

    @property
    def generic_rank(self) -> int:
        return generic_dual_dimension(self)[0]

    def q_array(self) -> np.ndarray:
        dim = self.metadata.get("ambient_dim", 0)
        return np.array([pr.q for pr in self.pairs]).reshape(-1, dim)


# ---------------------------------------------------------------------------
# fiber charts

def chart_to_fiber(pole, y):
    y = np.asarray(y, dtype=float)
    n2 = float(y @ y)
    return np.concatenate([2 * y / (1 + n2), [pole * (1 - n2) / (1 + n2)]])


def fiber_chart(s) -> FiberChart:
    """Chart with ``|y| <= 1`` containing the unit vector ``s``."""
    s = np.asarray(s, dtype=float)
    pole = 1 if s[-1] >= 0 else -1
    y = s[:-1] / (1 + abs(s[-1]))
    return FiberChart(pole, tuple(float(v) for v in y))


def fiber_grid(k, n):
    """Deterministic grid on S^{k-1} (hyperspherical angles, n per angle)."""
    if k < 1:
        return np.zeros((0, 0))
    if k == 1:
        return np.array([[1.0], [-1.0]])
    polar = [np.linspace(0, np.pi, n) for _ in range(k - 2)]
    last = np.linspace(0, 2 * np.pi, n, endpoint=False)
    mesh = np.meshgrid(*polar, last, indexing="ij")
    angles = np.stack([a.ravel() for a in mesh], axis=1)
    out = np.ones((len(angles), k))
    for j in range(k - 1):
        out[:, j] *= np.cos(angles[:, j])
        out[:, j + 1:] *= np.sin(angles[:, j])[:, None]
    return out


def _unit(s):
    s = np.asarray(s, dtype=float)
    if abs(np.linalg.norm(s) - 1) > 1e-12:
        raise ValueError(f"fiber point must be a unit vector, |s| = {np.linalg.norm(s)!r}")
    return s


def antipode(q):
    return -np.asarray(q, dtype=float)


# ---------------------------------------------------------------------------
# Gram-Schmidt shared by floats and Taylor values; batch axis first

def _dot(x, y, sig):
    return (x * y * sig).sum(-1, keepdims=True)


def _sqrt(x):
    return x.sqrt() if isinstance(x, Taylor) else np.sqrt(x)


def _val(x):
    return x.value if isinstance(x, Taylor) else x


def _orthonormal_span(vectors, sig):
    basis, signs = [], []
    for v in vectors:
        r = v
        for b, s in zip(basis, signs):
            r = r - b * (s * _dot(v, b, sig))
        sp = _dot(r, r, sig)
        sgn = np.where(_val(sp) < 0, -1.0, 1.0)
        basis.append(r / _sqrt(sp * sgn))
        signs.append(sgn)
    return basis, signs


def _frame_pivots(p, d1, sig, k):
    """Pivoted axis order for the normal frame at base values.

    p: (B, D), d1: (B, m, D). Returns pivots (B, k), frame (B, k, D) and
    the residual norm of every chosen pivot (B, k).
    """
    B, D = p.shape
    basis, signs = _orthonormal_span([p] + [d1[:, i] for i in range(d1.shape[1])], sig)
    resid = np.broadcast_to(np.eye(D), (B, D, D)).copy()
    for _ in range(2):
        for b, s in zip(basis, signs):
            coef = np.einsum("bad,bd->ba", resid, b * sig) * s
            resid -= coef[:, :, None] * b[:, None, :]
    pivots = np.zeros((B, k), dtype=int)
    norms = np.zeros((B, k))
    frame = np.zeros((B, k, D))
    rows = np.arange(B)
    used = np.zeros((B, D), dtype=bool)
    for j in range(k):
        nr = np.linalg.norm(resid, axis=-1)
        nr[used] = -np.inf
        a = np.argmax(nr, axis=1)
        r = resid[rows, a]
        sp = np.einsum("bd,bd->b", r * sig, r)
        sgn = np.where(sp < 0, -1.0, 1.0)
        nj = r / np.sqrt(np.abs(sp))[:, None]
        pivots[:, j] = a
        norms[:, j] = nr[rows, a]
        frame[:, j] = nj
        used[rows, a] = True
        coef = np.einsum("bad,bd->ba", resid, nj * sig) * sgn[:, None]
        resid -= coef[:, :, None] * nj[:, None, :]
    return pivots, frame, norms


def _frame_from_pivots(P, Ds, pivots, sig):
    """Normal frame with a frozen axis order; works on floats or Taylor values."""
    D = len(sig)
    basis, signs = _orthonormal_span([P] + list(Ds), sig)
    out = []
    for j in range(pivots.shape[1]):
        e = np.eye(D)[pivots[:, j]]
        r = None
        for b, s in zip(basis, signs):
            term = b * (s * _dot(e, b, sig))
            r = term if r is None else r + term
        r = -r + e
        sp = _dot(r, r, sig)
        sgn = np.where(_val(sp) < 0, -1.0, 1.0)
        nj = r / _sqrt(sp * sgn)
        basis.append(nj)
        signs.append(sgn)
        out.append(nj)
    return out


def _fiber_values(poles, Y, vars_=None):
    """Fiber points s_j(y) as a list of (B, 1) values (Taylor if ``vars_``)."""
    k = Y.shape[1] + 1
    if k == 1:
        return [poles[:, None].astype(float)]
    ys = vars_ if vars_ is not None else [Y[:, j:j + 1] for j in range(k - 1)]
    n2 = ys[0] * ys[0]
    for y in ys[1:]:
        n2 = n2 + y * y
    inv = 1.0 / (n2 + 1.0)
    s = [y * 2.0 * inv for y in ys]
    s.append((-n2 + 1.0) * inv * poles[:, None].astype(float))
    return s


def normal_frame(ms: MetricSpace, jet: Jet2, tol=DEFAULT_TOL) -> NormalFrame:
    """Orthonormal basis of {x : x _|_ p, x _|_ T_p(M)}, seeded by coordinate axes."""
    _, rank = orthonormalize(ms, np.vstack([jet.p, jet.d1]), tol)
    if rank < jet.nparams + 1:
        raise NonSmoothError(f"tangent rank {rank - 1} < {jet.nparams} at u={jet.u}")
    k = ms.ambient_dim - 1 - jet.nparams
    pivots, frame, _ = _frame_pivots(jet.p[None], jet.d1[None], ms.diag, k)
    return NormalFrame(jet, frame[0], tuple(int(a) for a in pivots[0]))


def dual_point(frame: NormalFrame, s) -> np.ndarray:
    s = _unit(np.atleast_1d(s))
    if len(s) != frame.k:
        raise ValueError(f"fiber point needs {frame.k} coordinates")
    return s @ frame.n


# ---------------------------------------------------------------------------
# batched dual jets

def _dual_jets_ad(patch, U, poles, Y, pivots):
    m, k = patch.param_dim, patch.codim
    nv = m + max(k - 1, 0)
    sig = patch.metric.diag
    F = patch.taylor(U, nvars=nv, order=3)
    p, d1, d2 = _jets_from_taylor(F, m)
    if pivots is None:
        pivots, _, norms = _frame_pivots(p, d1, sig, k)
    else:
        norms = _check_pivots(p, d1, sig, pivots)
    frame = _frame_from_pivots(F, [F.deriv(i) for i in range(m)], pivots, sig)
    ys = [F.space.variable(m + j, Y[:, j:j + 1]) for j in range(k - 1)]
    svals = _fiber_values(poles, Y, ys if k > 1 else None)
    G = frame[0] * svals[0]
    for nj, sj in zip(frame[1:], svals[1:]):
        G = G + nj * sj
    q, dq, d2q = _jets_from_taylor(G, nv)
    return (p, d1, d2), (q, dq, d2q), pivots, norms


def _check_pivots(p, d1, sig, pivots):
    """Residual norms of frozen pivots at these points; raise if degenerate."""
    k = pivots.shape[1]
    best, _, _ = _frame_pivots(p, d1, sig, k)
    basis, signs = _orthonormal_span([p] + [d1[:, i] for i in range(d1.shape[1])], sig)
    D = p.shape[1]
    norms = np.zeros(pivots.shape)
    for j in range(k):
        e = np.eye(D)[pivots[:, j]]
        r = e.copy()
        for b, s in zip(basis, signs):
            r = r - b * (s * _dot(r, b, sig))
        norms[:, j] = np.linalg.norm(r, axis=-1)
        rr = _dot(r, r, sig)
        sgn = np.where(rr < 0, -1.0, 1.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            nj = r / np.sqrt(rr * sgn)
        basis.append(nj)
        signs.append(sgn)
    bad = np.any(norms < PIVOT_FLOOR, axis=1)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise FrameDiscontinuityError(
            f"frozen pivot order {tuple(pivots[i])} degenerates here (best order "
            f"{tuple(best[i])}); re-chart")
    return norms


def _g_values(patch, X, poles, pivots, h):
    """Float evaluation of g(u, y) with frame derivatives by central differences."""
    m = patch.param_dim
    U, Y = X[:, :m], X[:, m:]
    sig = patch.metric.diag
    p = patch(U)
    d1 = np.stack([(patch(U + h * e) - patch(U - h * e)) / (2 * h) for e in np.eye(m)], axis=1)
    frame = _frame_from_pivots(p, [d1[:, i] for i in range(m)], pivots, sig)
    svals = _fiber_values(poles, Y)
    return sum(nj * sj for nj, sj in zip(frame, svals))


def _dual_jets_fd(patch, U, poles, Y, pivots, h):
    m, k = patch.param_dim, patch.codim
    sig = patch.metric.diag
    p, d1, d2 = fd_jets(patch, U, h)
    if pivots is None:
        pivots, _, norms = _frame_pivots(p, d1, sig, k)
    else:
        norms = _check_pivots(p, d1, sig, pivots)
    X = np.hstack([U, Y])
    B = len(U)

    def g(pts):
        reps = len(pts) // B
        return _g_values(patch, pts, np.repeat(poles, reps), np.repeat(pivots, reps, axis=0), h)

    q, dq, d2q = fd_jets(g, X, h)
    return (p, d1, d2), (q, dq, d2q), pivots, norms


def _smooth_rows(patch, U, method, h):
    """Tangent-rank test at base values; returns (smooth mask, stable mask)."""
    _, d1, _ = ad_jets(patch, U) if method == "AD" else fd_jets(patch, U, h)
    sv = np.linalg.svd(d1, compute_uv=False)
    ranks = [gap_rank(row) for row in sv]
    smooth = np.array([r[0] == patch.param_dim for r in ranks], dtype=bool)
    stable = np.array([r[1] for r in ranks], dtype=bool)
    return smooth, stable


def _pairs_from_rows(patch, U, S, method, h, tol):
    """DualPairs for parameter rows ``U`` and fiber points ``S``."""
    if method not in ("AD", "FD"):
        raise ValueError(f"unknown jet method {method!r}")
    ms = patch.metric
    k = patch.codim
    smooth, stable_p = _smooth_rows(patch, U, method, h)
    skipped = int(np.count_nonzero(~smooth))
    U, S, stable_p = U[smooth], S[smooth], stable_p[smooth]
    if len(U) == 0:
        return [], skipped
    charts = [fiber_chart(s) for s in S]
    poles = np.array([c.pole for c in charts])
    Y = np.array([c.y for c in charts], dtype=float).reshape(len(S), max(k - 1, 0))
    if method == "AD":
        base, dual, _, _ = _dual_jets_ad(patch, U, poles, Y, None)
        label = "AD"
    else:
        base, dual, _, _ = _dual_jets_fd(patch, U, poles, Y, None, h)
        label = f"FD({h:g})"
    p, d1, d2 = base
    q, dq, d2q = dual
    _, sv_q, vt_q = np.linalg.svd(dq, full_matrices=False)

    pairs = []
    for i in range(len(U)):
        rank_q, stable_q, ratio = gap_rank(sv_q[i])
        Tp, _ = orthonormalize(ms, d1[i], tol)
        Tq, _ = orthonormalize(ms, vt_q[i, :rank_q], tol)
        xy = np.concatenate([U[i], Y[i]])
        pairs.append(DualPair(
            u=U[i].copy(), s=np.asarray(S[i], dtype=float), p=p[i], q=q[i], Tp=Tp, Tq=Tq,
            rank_q=rank_q, generic=bool(stable_p[i] and stable_q),
            base_jet=Jet2(U[i].copy(), p[i], d1[i], d2[i], label),
            dual_jet=Jet2(xy, q[i], dq[i], d2q[i], label),
            chart=charts[i], gap_q=ratio))
    return pairs, skipped


def _threads():
    try:
        return max(1, int(os.environ.get("DUALFORM_THREADS", "1")))
    except ValueError:
        return 1


def _pairs_chunked(patch, U, S, method, h, tol):
    if patch.codim < 1:
        raise ValueError(f"{patch.describe()} has {patch.param_dim} parameters in S^{patch.metric.N}; "
                         "the dual variety needs codimension >= 1")
    chunks = [(U[i:i + CHUNK], S[i:i + CHUNK]) for i in range(0, len(U), CHUNK)]
    work = lambda c: _pairs_from_rows(patch, c[0], c[1], method, h, tol)  # noqa: E731
    nthreads = min(_threads(), len(chunks))
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            results = list(pool.map(work, chunks))  # map keeps chunk order
    else:
        results = [work(c) for c in chunks]
    pairs = [pr for res in results for pr in res[0]]
    return pairs, sum(res[1] for res in results)


def dual_jet2(patch: ParamPatch, u, chart: FiberChart, method="AD", h=DEFAULT_FD_STEP,
              pivots=None) -> Jet2:
    """2-jet of the dual map g at (u, chart.y).

    ``pivots`` freezes the frame's axis order (as chosen at some nearby base
    point); if that order degenerates at ``u`` a FrameDiscontinuityError is
    raised.
    """
    u = np.asarray(u, dtype=float).reshape(patch.param_dim)
    patch.check_domain(u)
    k = patch.codim
    y = np.asarray(chart.y, dtype=float).reshape(1, max(k - 1, 0))
    poles = np.array([chart.pole])
    piv = None if pivots is None else np.asarray(pivots, dtype=int).reshape(1, k)
    if method == "AD":
        _, (q, dq, d2q), _, _ = _dual_jets_ad(patch, u[None], poles, y, piv)
        label = "AD"
    elif method == "FD":
        _, (q, dq, d2q), _, _ = _dual_jets_fd(patch, u[None], poles, y, piv, h)
        label = f"FD({h:g})"
    else:
        raise ValueError(f"unknown jet method {method!r}")
    return Jet2(np.concatenate([u, y[0]]), q[0], dq[0], d2q[0], label)


def resolve_grid(grid, m, k):
    """Split ``grid`` into m parameter resolutions and one fiber resolution.

    Missing entries repeat the last given value.
    """
    grid = [int(g) for g in np.atleast_1d(grid)]
    if not grid or min(grid) < 2:
        raise ValueError("grid resolutions must be >= 2")
    full = grid + [grid[-1]] * max(0, m + 1 - len(grid))
    return full[:m], full[m]


def trace_dual(patch: ParamPatch, grid=256, method="AD", h=DEFAULT_FD_STEP,
               tol=DEFAULT_TOL) -> DualCloud:
    """Sample M^v on the product of a parameter grid and a fiber-sphere grid.

    Rows are ordered parameter-major, fiber-minor. Base points where the
    tangent rank drops are skipped and counted.
    """
    res, fiber_res = resolve_grid(grid, patch.param_dim, patch.codim)
    U0 = patch.grid(res)
    F0 = fiber_grid(patch.codim, fiber_res)
    U = np.repeat(U0, len(F0), axis=0)
    S = np.tile(F0, (len(U0), 1))
    pairs, skipped = _pairs_chunked(patch, U, S, method, h, tol)
    meta = {"kind": "grid", "grid": list(res), "fiber_grid": fiber_res if patch.codim > 1 else 2,
            "method": method, "ambient_dim": patch.metric.ambient_dim}
    return DualCloud(pairs, meta, skipped)


def sample_dual(patch: ParamPatch, samples=100, seed=0, method="AD", h=DEFAULT_FD_STEP,
                tol=DEFAULT_TOL) -> DualCloud:
    """Seeded uniform random pairs: u uniform in the box, s uniform on S^{k-1}."""
    rng = np.random.default_rng(seed)
    lo = np.array([d[0] for d in patch.domain])
    hi = np.array([d[1] for d in patch.domain])
    U = lo + (hi - lo) * rng.random((samples, patch.param_dim))
    k = patch.codim
    if k == 1:
        S = rng.choice([-1.0, 1.0], size=(samples, 1))
    else:
        S = rng.normal(size=(samples, k))
        S /= np.linalg.norm(S, axis=1, keepdims=True)
    pairs, skipped = _pairs_chunked(patch, U, S, method, h, tol)
    meta = {"kind": "random", "samples": samples, "seed": seed, "method": method,
            "ambient_dim": patch.metric.ambient_dim}
    return DualCloud(pairs, meta, skipped)


def dual_pairs(patch: ParamPatch, u, s, method="AD", h=DEFAULT_FD_STEP,
               tol=DEFAULT_TOL) -> DualCloud:
    """Pairs at explicit parameter points ``u`` (B, m) and unit fiber points ``s`` (B, k)."""
    U = np.atleast_2d(np.asarray(u, dtype=float))
    S = np.asarray(s, dtype=float).reshape(len(U), patch.codim)
    patch.check_domain(U)
    for row in S:
        _unit(row)
    pairs, skipped = _pairs_chunked(patch, U, S, method, h, tol)
    meta = {"kind": "explicit", "method": method, "ambient_dim": patch.metric.ambient_dim}
    return DualCloud(pairs, meta, skipped)


def generic_dual_dimension(cloud: DualCloud):
    """Modal rank of the dual map over the cloud and the fraction attaining it."""
    if not cloud.pairs:
        raise ValueError("empty dual cloud")
    counts = Counter(pr.rank_q for pr in cloud.pairs)
    rank, n = max(sorted(counts.items()), key=lambda kv: kv[1])
    return rank, n / len(cloud.pairs)
