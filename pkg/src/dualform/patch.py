"""Parametrized pieces of a subvariety of the sphere or the hyperbolic sheet."""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .expr import Expr, patch_text
from .metric import DEFAULT_TOL, MetricSpace, Signature, orthonormalize
from .taylor import Taylor, space

SHEET_TOL = 1e-10
DEFAULT_FD_STEP = 1e-3


class Sheet(enum.Enum):
    SPHERE = "sphere"
    HYPERBOLIC = "hyperbolic"

    @property
    def sigma(self) -> float:
        return 1.0 if self is Sheet.SPHERE else -1.0


class NotOnSheetError(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class ParamPatch:
    """A map from a closed box in R^m into S (sphere) or the upper hyperbolic sheet.

    ``periodic[i]`` marks axes whose map repeats over the box; sampling
    grids then omit the right endpoint.
    """

    metric: MetricSpace
    params: tuple
    domain: tuple
    exprs: tuple
    sheet: Sheet = Sheet.SPHERE
    periodic: tuple = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "exprs", tuple(self.exprs))
        object.__setattr__(self, "domain", tuple((float(lo), float(hi)) for lo, hi in self.domain))
        object.__setattr__(self, "sheet", Sheet(self.sheet))
        periodic = tuple(self.periodic) or (False,) * len(self.params)
        object.__setattr__(self, "periodic", tuple(bool(p) for p in periodic))
        m = len(self.params)
        if m < 1:
            raise ValueError("a patch needs at least one parameter")
        if len(self.domain) != m or len(self.periodic) != m:
            raise ValueError("domain and periodic flags must have one entry per parameter")
        if any(lo >= hi for lo, hi in self.domain):
            raise ValueError("domain boxes need lo < hi on every axis")
        if len(self.exprs) != self.metric.ambient_dim:
            raise ValueError(f"map has {len(self.exprs)} components, ambient space has "
                             f"{self.metric.ambient_dim}")
        if not all(isinstance(e, Expr) for e in self.exprs):
            raise TypeError("map components must be expression trees")
        want = Signature.EUCLIDEAN if self.sheet is Sheet.SPHERE else Signature.LORENTZIAN
        if self.metric.signature is not want:
            raise ValueError(f"{self.sheet.value} patches need a {want.value} metric")
        self.check_sheet(self.grid([5] * m))

    @property
    def param_dim(self) -> int:
        return len(self.params)

    @property
    def codim(self) -> int:
        """Rank k of the normal bundle inside S: N - m."""
        return self.metric.N - self.param_dim

    def describe(self) -> str:
        return self.name or patch_text(self.exprs)

    # -- evaluation ---------------------------------------------------------
    def __call__(self, u):
        """Evaluate at points ``u`` of shape (m,) or (B, m)."""
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        u = np.atleast_2d(u)
        env = {name: u[:, i] for i, name in enumerate(self.params)}
        memo = {}
        cols = [np.broadcast_to(np.asarray(e.evaluate(env, memo), dtype=float), (u.shape[0],))
                for e in self.exprs]
        out = np.stack(cols, axis=-1)
        return out[0] if single else out

    def taylor(self, u, nvars=None, order=2) -> Taylor:
        """Taylor expansion at a batch of points, shape (B, ambient_dim).

        The first m Taylor variables are the parameters; extra variables
        (``nvars > m``) are left free for callers that extend the chart.
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        sp = space(self.param_dim if nvars is None else nvars, order)
        env = {name: sp.variable(i, u[:, i]) for i, name in enumerate(self.params)}
        memo = {}
        comps = []
        for e in self.exprs:
            val = e.evaluate(env, memo)
            if not isinstance(val, Taylor):
                val = sp.constant(np.full(u.shape[0], float(val)))
            comps.append(val)
        return Taylor.stack(comps, axis=-1)

    def residual(self, points) -> np.ndarray:
        """Sheet constraint residual |<f,f> - sigma| per point."""
        return np.abs(self.metric.inner(points, points) - self.sheet.sigma)

    def check_sheet(self, u, tol=SHEET_TOL):
        pts = self(np.atleast_2d(u))
        res = self.residual(pts)
        if np.any(res > tol):
            i = int(np.argmax(res))
            raise NotOnSheetError(f"{self.describe()}: constraint residual {res[i]:.3g} "
                                  f"at u={np.atleast_2d(u)[i]}")
        if self.sheet is Sheet.HYPERBOLIC and np.any(pts[:, -1] <= 0):
            raise NotOnSheetError(f"{self.describe()}: leaves the upper hyperbolic sheet")

    def check_domain(self, u, margin=0.0):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.param_dim:
            raise DomainError(f"expected {self.param_dim} parameters, got {u.shape[-1]}")
        for i, (lo, hi) in enumerate(self.domain):
            pad = 0.0 if self.periodic[i] else margin
            x = u[..., i]
            if np.any(x < lo + pad - 1e-12) or np.any(x > hi - pad + 1e-12):
                raise DomainError(f"parameter {self.params[i]}={x} outside [{lo + pad}, {hi - pad}]")

    # -- sampling -----------------------------------------------------------
    def axis_samples(self, i, n):
        lo, hi = self.domain[i]
        return np.linspace(lo, hi, n, endpoint=not self.periodic[i])

    def grid(self, resolution):
        axes = [self.axis_samples(i, n) for i, n in enumerate(resolution)]
        return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, self.param_dim)


@dataclass(frozen=True)
class Jet2:
    """Point and first/second partials of a map at one parameter point.

    ``d1[i]`` is the i-th partial, ``d2[i, j]`` the mixed second partial;
    vectors are stored along the last axis.
    """

    u: np.ndarray
    p: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    method: str = "AD"

    @property
    def nparams(self) -> int:
        return self.d1.shape[0]


def _jets_from_taylor(t: Taylor, nvars):
    p = t.value
    d1 = np.moveaxis(t.gradient(nvars), 0, -2)        # (B, n, D)
    d2 = np.moveaxis(t.hessian(nvars), (0, 1), (-3, -2))  # (B, n, n, D)
    return p, d1, d2


def ad_jets(patch: ParamPatch, u):
    """Batched AD 2-jets: arrays p (B, D), d1 (B, m, D), d2 (B, m, m, D)."""
    return _jets_from_taylor(patch.taylor(u, order=2), patch.param_dim)


def fd_jets(func, u, h):
    """Batched central-difference 2-jets of a vectorized map ``func``.

    ``func`` takes (B, n) points and returns (B, D) values. Errors are
    O(h^2) for smooth maps.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    B, n = u.shape
    eye = np.eye(n) * h
    shifts = [np.zeros(n)]
    for i in range(n):
        shifts += [eye[i], -eye[i]]
    for i in range(n):
        for j in range(i + 1, n):
            shifts += [eye[i] + eye[j], eye[i] - eye[j], -eye[i] + eye[j], -eye[i] - eye[j]]
    shifts = np.array(shifts)
    pts = (u[:, None, :] + shifts[None, :, :]).reshape(-1, n)
    vals = np.asarray(func(pts)).reshape(B, len(shifts), -1)
    f0 = vals[:, 0]
    D = vals.shape[-1]
    d1 = np.empty((B, n, D))
    d2 = np.empty((B, n, n, D))
    for i in range(n):
        fp, fm = vals[:, 1 + 2 * i], vals[:, 2 + 2 * i]
        d1[:, i] = (fp - fm) / (2 * h)
        d2[:, i, i] = (fp - 2 * f0 + fm) / (h * h)
    k = 1 + 2 * n
    for i in range(n):
        for j in range(i + 1, n):
            pp, pm, mp, mm = (vals[:, k + c] for c in range(4))
            d2[:, i, j] = d2[:, j, i] = (pp - pm - mp + mm) / (4 * h * h)
            k += 4
    return f0, d1, d2


def eval_jet2(patch: ParamPatch, u, method="AD", h=DEFAULT_FD_STEP) -> Jet2:
    """2-jet of ``patch`` at ``u`` by forward-mode AD or central differences."""
    u = np.asarray(u, dtype=float).reshape(patch.param_dim)
    patch.check_domain(u)
    if method == "AD":
        p, d1, d2 = (a[0] for a in ad_jets(patch, u[None]))
        label = "AD"
    elif method == "FD":
        p, d1, d2 = (a[0] for a in fd_jets(patch, u[None], h))
        label = f"FD({h:g})"
    else:
        raise ValueError(f"unknown jet method {method!r}")
    res = float(patch.residual(p))
    if res > SHEET_TOL:
        raise NotOnSheetError(f"constraint residual {res:.3g} at u={u}")
    return Jet2(u, p, d1, d2, label)


def tangent_basis(ms: MetricSpace, jet: Jet2, tol=DEFAULT_TOL):
    """Orthonormal basis of T_p(M) (a linear subspace, not containing p)."""
    basis, rank = orthonormalize(ms, jet.d1, tol)
    return basis, rank == jet.nparams


def fd_crosscheck(patch: ParamPatch, u, h=DEFAULT_FD_STEP) -> float:
    """Largest entrywise gap between the AD and FD(h) jets at ``u``."""
    u = np.asarray(u, dtype=float).reshape(patch.param_dim)
    try:
        patch.check_domain(u, margin=h)
    except DomainError as err:
        raise DomainError(f"finite-difference stencil leaves the domain: {err}") from None
    a = eval_jet2(patch, u, "AD")
    f = eval_jet2(patch, u, "FD", h)
    return float(max(np.max(np.abs(a.p - f.p)), np.max(np.abs(a.d1 - f.d1)),
                     np.max(np.abs(a.d2 - f.d2))))
