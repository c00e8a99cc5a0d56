"""Truncated multivariate Taylor arithmetic (forward-mode AD of any order).

A :class:`Taylor` holds the coefficients ``c[alpha] = d^alpha f / alpha!``
of a function of ``nvars`` variables for every multi-index of total degree
up to ``order``. Coefficients have shape ``(n_terms, *shape)``, so one value
can carry a whole batch of points and/or a vector of components; all
arithmetic broadcasts over ``shape`` like numpy.

Univariate functions are applied by composing with their Taylor series
around the constant term, which is exact to the truncation order.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np


class TaylorSpace:
    """Monomial bookkeeping for ``nvars`` variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        monos = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), d):
                alpha = [0] * nvars
                for v in combo:
                    alpha[v] += 1
                monos.append(tuple(alpha))
        self.monomials = monos
        self.index = {a: i for i, a in enumerate(monos)}
        self.degree = np.array([sum(a) for a in monos])
        self.size = len(monos)
        self._mul_tables = {}

    def mul_table(self, order):
        """Index pairs (i, j) -> k with deg(i) + deg(j) <= order, sorted by k."""
        if order not in self._mul_tables:
            rows = []
            for i, a in enumerate(self.monomials):
                for j, b in enumerate(self.monomials):
                    if sum(a) + sum(b) <= order:
                        k = self.index[tuple(x + y for x, y in zip(a, b))]
                        rows.append((k, i, j))
            rows.sort()
            arr = np.array(rows, dtype=int).reshape(-1, 3)
            ks = arr[:, 0]
            starts = np.flatnonzero(np.r_[True, ks[1:] != ks[:-1]])
            self._mul_tables[order] = (arr[:, 1], arr[:, 2], ks[starts], starts)
        return self._mul_tables[order]

    def unit(self, var):
        alpha = [0] * self.nvars
        alpha[var] = 1
        return self.index[tuple(alpha)]

    def variable(self, var, value):
        """The Taylor value of variable ``var`` expanded around ``value``."""
        value = np.asarray(value, dtype=float)
        c = np.zeros((self.size,) + value.shape)
        c[0] = value
        c[self.unit(var)] = 1.0
        return Taylor(self, c)

    def constant(self, value, order=None):
        value = np.asarray(value, dtype=float)
        c = np.zeros((self.size,) + value.shape)
        c[0] = value
        return Taylor(self, c, self.order if order is None else order)


@lru_cache(maxsize=None)
def space(nvars: int, order: int) -> TaylorSpace:
    return TaylorSpace(nvars, order)


class Taylor:
    __slots__ = ("space", "coeffs", "order")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, space: TaylorSpace, coeffs, order=None):
        self.space = space
        self.order = space.order if order is None else order
        coeffs = np.asarray(coeffs, dtype=float)
        if self.order < space.order:
            coeffs = coeffs.copy()
            coeffs[space.degree > self.order] = 0.0
        self.coeffs = coeffs

    # -- basic accessors ----------------------------------------------------
    @property
    def value(self):
        return self.coeffs[0]

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Taylor(self.space, self.coeffs[(slice(None),) + idx], self.order)

    def __repr__(self):
        return f"Taylor(nvars={self.space.nvars}, order={self.order}, shape={self.shape})"

    def sum(self, axis=-1, keepdims=False):
        ax = axis if axis < 0 else axis + 1
        return Taylor(self.space, self.coeffs.sum(axis=ax, keepdims=keepdims), self.order)

    @staticmethod
    def stack(items, axis=-1):
        ax = axis if axis < 0 else axis + 1
        sp = items[0].space
        return Taylor(sp, np.stack([t.coeffs for t in items], axis=ax), min(t.order for t in items))

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Taylor):
            return Taylor(self.space, self.coeffs + other.coeffs, min(self.order, other.order))
        c = np.array(self.coeffs, copy=True)
        c = c + np.zeros_like(np.asarray(other, dtype=float))  # broadcast shape
        c[0] = c[0] + other
        return Taylor(self.space, c, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Taylor(self.space, -self.coeffs, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Taylor):
            return Taylor(self.space, self.coeffs * np.asarray(other, dtype=float), self.order)
        order = min(self.order, other.order)
        ii, jj, ks, starts = self.space.mul_table(order)
        a, b = self.coeffs, other.coeffs
        prod = a[ii] * b[jj]
        out = np.zeros((self.space.size,) + prod.shape[1:])
        out[ks] = np.add.reduceat(prod, starts, axis=0)
        return Taylor(self.space, out, order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Taylor):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if int(n) != n:
            raise TypeError("only integer powers are supported")
        n = int(n)
        if n < 0:
            return (self ** (-n)).reciprocal()
        result = self.space.constant(np.ones(self.shape), self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    # -- univariate functions ----------------------------------------------
    def _compose(self, derivs):
        """Apply phi given [phi(a0), phi'(a0), ..., phi^(order)(a0)]."""
        h = Taylor(self.space, self.coeffs.copy(), self.order)
        h.coeffs[0] = 0.0
        out = np.zeros_like(self.coeffs)
        out[0] = derivs[0]
        result = Taylor(self.space, out, self.order)
        hp = None
        for n in range(1, self.order + 1):
            hp = h if hp is None else hp * h
            result = result + hp * (derivs[n] / math.factorial(n))
        return result

    def sin(self):
        a = self.value
        cyc = [np.sin(a), np.cos(a), -np.sin(a), -np.cos(a)]
        return self._compose([cyc[n % 4] for n in range(self.order + 1)])

    def cos(self):
        a = self.value
        cyc = [np.cos(a), -np.sin(a), -np.cos(a), np.sin(a)]
        return self._compose([cyc[n % 4] for n in range(self.order + 1)])

    def sinh(self):
        a = self.value
        cyc = [np.sinh(a), np.cosh(a)]
        return self._compose([cyc[n % 2] for n in range(self.order + 1)])

    def cosh(self):
        a = self.value
        cyc = [np.cosh(a), np.sinh(a)]
        return self._compose([cyc[n % 2] for n in range(self.order + 1)])

    def _real_power(self, alpha):
        a = self.value
        derivs = []
        coef = 1.0
        for n in range(self.order + 1):
            derivs.append(coef * a ** (alpha - n))
            coef *= alpha - n
        return self._compose(derivs)

    def sqrt(self):
        if np.any(self.value <= 0):
            raise ArithmeticError("sqrt needs a positive value to be differentiable")
        return self._real_power(0.5)

    def reciprocal(self):
        if np.any(self.value == 0):
            raise ZeroDivisionError("reciprocal of zero")
        return self._real_power(-1.0)

    # -- calculus -----------------------------------------------------------
    def deriv(self, var):
        """Partial derivative in variable ``var``; the order drops by one."""
        sp = self.space
        out = np.zeros_like(self.coeffs)
        for k, alpha in enumerate(sp.monomials):
            if sum(alpha) >= self.order:
                continue
            up = list(alpha)
            up[var] += 1
            out[k] = (alpha[var] + 1) * self.coeffs[sp.index[tuple(up)]]
        return Taylor(sp, out, self.order - 1)

    def gradient(self, nvars=None):
        """First partials, shape ``(nvars, *shape)``."""
        n = self.space.nvars if nvars is None else nvars
        return np.stack([self.coeffs[self.space.unit(i)] for i in range(n)])

    def hessian(self, nvars=None):
        """Second partials, shape ``(nvars, nvars, *shape)``; exactly symmetric."""
        if self.order < 2:
            raise ValueError("need order >= 2 for second derivatives")
        sp = self.space
        n = sp.nvars if nvars is None else nvars
        out = np.empty((n, n) + self.shape)
        for i in range(n):
            for j in range(i, n):
                alpha = [0] * sp.nvars
                alpha[i] += 1
                alpha[j] += 1
                c = self.coeffs[sp.index[tuple(alpha)]]
                out[i, j] = out[j, i] = 2.0 * c if i == j else c
        return out
