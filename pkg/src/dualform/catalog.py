"""Built-in test varieties and DSL patch files.

A DSL file holds one patch expression plus ``@`` directives::

    # Clifford torus in S^3
    @param u 0 2*pi periodic
    @param v 0 2*pi periodic
    @sheet sphere
    (cos(u)/sqrt(2), sin(u)/sqrt(2), cos(v)/sqrt(2), sin(v)/sqrt(2))

``@param`` lines fix the parameter order; without them parameters are
taken in order of appearance with the domain [0, 2*pi], periodic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as E
from .metric import MetricSpace, Signature
from .patch import ParamPatch, Sheet

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    param_names: tuple
    defaults: tuple
    build: object
    doc: str = ""
    # closed forms used by fixtures: known II on unit tangents, dual map
    known: dict = field(default_factory=dict)


def _circle_patch(name, r, c, sheet):
    sig = Signature.EUCLIDEAN if sheet is Sheet.SPHERE else Signature.LORENTZIAN
    exprs, params = E.parse(f"({r!r}*cos(t), {r!r}*sin(t), {c!r})", ["t"])
    return ParamPatch(MetricSpace(3, sig), params, [(0.0, TWO_PI)], exprs, sheet,
                      periodic=(True,), name=name)


def great_circle():
    exprs, params = E.parse("(cos(t), sin(t), 0)", ["t"])
    return ParamPatch(MetricSpace(3), params, [(0.0, TWO_PI)], exprs,
                      periodic=(True,), name="great_circle")


def small_circle(r=0.6):
    if not 0 < r < 1:
        raise ValueError(f"small_circle needs 0 < r < 1, got r={r}")
    c = math.sqrt(1 - r * r)
    return _circle_patch(f"small_circle:{r!r}", r, c, Sheet.SPHERE)


def hyperbolic_circle(r=0.6):
    if not r > 0:
        raise ValueError(f"hyperbolic_circle needs r > 0, got r={r}")
    c = math.sqrt(1 + r * r)
    return _circle_patch(f"hyperbolic_circle:{r!r}", r, c, Sheet.HYPERBOLIC)


def latitude_torus(a=0.6, b=0.8):
    if a <= 0 or b <= 0 or abs(a * a + b * b - 1) > 1e-12:
        raise ValueError(f"latitude_torus needs a, b > 0 with a^2 + b^2 = 1, got a={a}, b={b}")
    exprs, params = E.parse(f"({a!r}*cos(u), {a!r}*sin(u), {b!r}*cos(v), {b!r}*sin(v))",
                            ["u", "v"])
    return ParamPatch(MetricSpace(4), params, [(0.0, TWO_PI)] * 2, exprs,
                      periodic=(True, True), name=f"latitude_torus:{a!r},{b!r}")


def clifford_torus():
    exprs, params = E.parse(
        "(cos(u)/sqrt(2), sin(u)/sqrt(2), cos(v)/sqrt(2), sin(v)/sqrt(2))", ["u", "v"])
    return ParamPatch(MetricSpace(4), params, [(0.0, TWO_PI)] * 2, exprs,
                      periodic=(True, True), name="clifford_torus")


def random_trig_curve(seed=0, degree=3, dim=4):
    """Random trigonometric-polynomial curve pushed onto the unit sphere.

    The raw curve ``c(t) = a_0 + sum_k a_k cos(k t) + b_k sin(k t)`` has
    Gaussian coefficient vectors; the patch is ``c / |c|``. The constant
    term is scaled to dominate the harmonics so that ``|c|`` stays bounded
    away from zero.
    """
    seed, degree, dim = int(seed), int(degree), int(dim)
    if degree < 1 or dim < 3:
        raise ValueError("random_trig_curve needs degree >= 1 and dim >= 3")
    rng = np.random.default_rng(seed)
    a0 = rng.normal(size=dim)
    coef = rng.normal(size=(degree, 2, dim)) / np.arange(1, degree + 1)[:, None, None]
    ts = np.linspace(0, TWO_PI, 512, endpoint=False)
    k = np.arange(1, degree + 1)[:, None]
    wiggle = np.cos(k * ts).T @ coef[:, 0] + np.sin(k * ts).T @ coef[:, 1]
    a0 *= (1.5 * np.max(np.linalg.norm(wiggle, axis=1)) + 0.5) / np.linalg.norm(a0)
    t = E.Var("t")
    raw = []
    for i in range(dim):
        node = E.Const(float(a0[i]))
        for k in range(1, degree + 1):
            kt = E.mul(E.Const(float(k)), t)
            node = E.add(node, E.mul(E.Const(float(coef[k - 1, 0, i])), E.Func("cos", kt)))
            node = E.add(node, E.mul(E.Const(float(coef[k - 1, 1, i])), E.Func("sin", kt)))
        raw.append(node)
    sq = E.power(raw[0], 2)
    for node in raw[1:]:
        sq = E.add(sq, E.power(node, 2))
    norm = E.Func("sqrt", sq)   # shared subtree; evaluation memoizes it
    exprs = [E.div(node, norm) for node in raw]
    return ParamPatch(MetricSpace(dim), ("t",), [(0.0, TWO_PI)], exprs, periodic=(True,),
                      name=f"random_trig_curve:{seed},{degree},{dim}")


def _small_circle_known(r=0.6):
    c = math.sqrt(1 - r * r)
    return {"A": [[-c / r]], "A_dual": [[-r / c]]}


def _hyperbolic_circle_known(r=0.6):
    c = math.sqrt(1 + r * r)
    return {"A": [[-c / r]], "A_dual": [[-r / c]]}


CATALOG = {
    "great_circle": CatalogEntry("great_circle", (), (), great_circle,
                                 "equator of S^2; totally geodesic, dual is two points"),
    "small_circle": CatalogEntry("small_circle", ("r",), (0.6,), small_circle,
                                 "circle of radius r at height sqrt(1-r^2) in S^2",
                                 {"forms": _small_circle_known}),
    "clifford_torus": CatalogEntry("clifford_torus", (), (), clifford_torus,
                                   "flat torus in S^3 with radii 1/sqrt(2)",
                                   {"forms": lambda: {"A": [[-1, 0], [0, 1]],
                                                      "A_dual": [[-1, 0], [0, 1]]}}),
    "latitude_torus": CatalogEntry("latitude_torus", ("a", "b"), (0.6, 0.8), latitude_torus,
                                   "torus with radii a, b (a^2 + b^2 = 1) in S^3",
                                   {"forms": lambda a=0.6, b=0.8: {"A": [[-b / a, 0], [0, a / b]],
                                                                   "A_dual": [[-a / b, 0],
                                                                              [0, b / a]]}}),
    "hyperbolic_circle": CatalogEntry("hyperbolic_circle", ("r",), (0.6,), hyperbolic_circle,
                                      "circle of radius r on the upper sheet of H^2",
                                      {"forms": _hyperbolic_circle_known}),
    "random_trig_curve": CatalogEntry("random_trig_curve", ("seed", "degree", "dim"), (0, 3, 4),
                                      random_trig_curve,
                                      "normalized random trigonometric curve on S^{dim-1}"),
}


def builtin(name: str, params=()) -> ParamPatch:
    """Construct a catalog patch, e.g. ``builtin("small_circle", [0.6])``."""
    try:
        entry = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown builtin {name!r}; choose from {', '.join(sorted(CATALOG))}") \
            from None
    params = list(params)
    if len(params) > len(entry.param_names):
        raise ValueError(f"{name} takes at most {len(entry.param_names)} parameters "
                         f"({', '.join(entry.param_names) or 'none'})")
    args = params + list(entry.defaults[len(params):])
    return entry.build(*args)


def parse_builtin_spec(spec: str) -> ParamPatch:
    """``"small_circle:0.6"`` or ``"random_trig_curve:7,3,4"`` -> patch."""
    name, _, rest = spec.partition(":")
    params = []
    if rest:
        for tok in rest.split(","):
            try:
                params.append(float(tok))
            except ValueError:
                raise ValueError(f"bad builtin parameter {tok!r} in {spec!r}") from None
    return builtin(name, params)


def load_dsl(text: str, name="") -> ParamPatch:
    """Build a patch from DSL text with optional ``@param``/``@sheet`` directives."""
    params, domain, periodic = [], [], []
    sheet = Sheet.SPHERE
    body = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped.startswith("@"):
            body.append(line.split("#", 1)[0])
            continue
        body.append("")  # keep line numbers aligned for parse errors
        words = stripped[1:].split()
        if words and words[0] == "param" and len(words) in (4, 5):
            params.append(words[1])
            lo = E.parse_expr(words[2], []).evaluate({})
            hi = E.parse_expr(words[3], []).evaluate({})
            domain.append((float(lo), float(hi)))
            if len(words) == 5 and words[4] != "periodic":
                raise ValueError(f"line {lineno}: expected 'periodic', got {words[4]!r}")
            periodic.append(len(words) == 5)
        elif words and words[0] == "sheet" and len(words) == 2:
            sheet = Sheet(words[1])
        else:
            raise ValueError(f"line {lineno}: bad directive {stripped!r}")
    exprs, found = E.parse("\n".join(body), params or None)
    if not params:
        params = found
        domain = [(0.0, TWO_PI)] * len(params)
        periodic = [True] * len(params)
    sig = Signature.EUCLIDEAN if sheet is Sheet.SPHERE else Signature.LORENTZIAN
    return ParamPatch(MetricSpace(len(exprs), sig), params, domain, exprs, sheet,
                      periodic=periodic, name=name)
