"""Truncated multivariate Taylor series ("jets") evaluated at many points at once.

A jet stores, for each of ``P`` base points, the Taylor coefficients of a
function in ``2n`` independent variables ``(dz_1..dz_n, dzb_1..dzb_n)`` up to a
total degree.  Holomorphic and antiholomorphic coordinates are treated as
independent, so the coefficient of ``dz^a dzb^b`` equals
``d^a dbar^b f / (a! b!)``.

Jets implement ``__array_ufunc__`` for the elementary functions used by the
built-in potentials, so an expression written with ``np.log``/``np.exp`` works
on plain arrays and on jets alike.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numba
import numpy as np


class JetSpace:
    """Index tables for monomials in ``nvars`` variables of degree <= ``degree``."""

    def __init__(self, nvars: int, degree: int):
        self.nvars = nvars
        self.degree = degree
        monos = []
        for d in range(degree + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), d):
                m = [0] * nvars
                for v in combo:
                    m[v] += 1
                monos.append(tuple(m))
        self.monomials = monos
        self.index = {m: i for i, m in enumerate(monos)}
        self.size = len(monos)
        self.degrees = np.array([sum(m) for m in monos])
        # monomials are graded, so those of degree <= d are the first size_upto[d]
        self.size_upto = np.array([int(np.sum(self.degrees <= d)) for d in range(degree + 1)])
        self.factorials = np.array([math.prod(math.factorial(e) for e in m) for m in monos], dtype=float)

        pi, pj, pk = [], [], []
        for i, mi in enumerate(monos):
            for j, mj in enumerate(monos):
                if self.degrees[i] + self.degrees[j] > degree:
                    continue
                pi.append(i)
                pj.append(j)
                pk.append(self.index[tuple(a + b for a, b in zip(mi, mj))])
        # sorted by target so that a prefix covers all targets of degree <= d
        order = np.argsort(pk, kind="stable")
        self._pi = np.array(pi, dtype=np.int64)[order]
        self._pj = np.array(pj, dtype=np.int64)[order]
        self._pk = np.array(pk, dtype=np.int64)[order]
        self._npairs_upto = np.array([int(np.sum(self.degrees[self._pk] <= d)) for d in range(degree + 1)])

        # derivative tables: d/dvar maps coefficient of m + e_v into m with factor (m_v + 1)
        self._dsrc = []
        self._dfac = []
        n_low = self.size_upto[degree - 1] if degree > 0 else 0
        for v in range(nvars):
            src = np.zeros(n_low, dtype=int)
            fac = np.zeros(n_low)
            for i in range(n_low):
                m = list(monos[i])
                m[v] += 1
                src[i] = self.index[tuple(m)]
                fac[i] = m[v]
            self._dsrc.append(src)
            self._dfac.append(fac)

    def multiply(self, a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
        out = np.zeros(a.shape, dtype=complex)
        _pair_products(np.ascontiguousarray(a, dtype=complex), np.ascontiguousarray(b, dtype=complex),
                       self._pi, self._pj, self._pk, int(self._npairs_upto[order]), out)
        return out

    def differentiate(self, a: np.ndarray, var: int, order: int) -> np.ndarray:
        out = np.zeros_like(a)
        if order <= 0:
            return out
        n = self.size_upto[order - 1]
        out[:n] = a[self._dsrc[var][:n]] * self._dfac[var][:n, None]
        return out


@numba.njit(cache=True, nogil=True)
def _pair_products(a, b, pi, pj, pk, npairs, out):
    npts = a.shape[1]
    for q in range(npairs):
        i = pi[q]
        j = pj[q]
        k = pk[q]
        for p in range(npts):
            out[k, p] += a[i, p] * b[j, p]


@lru_cache(maxsize=None)
def jet_space(nvars: int, degree: int) -> JetSpace:
    return JetSpace(nvars, degree)


_UNARY = {}


def _implements(ufunc):
    def deco(fn):
        _UNARY[ufunc] = fn
        return fn
    return deco


class Jet:
    """Vectorized truncated Taylor series.

    ``coeffs`` has shape ``(space.size, npoints)``; coefficients above ``order`` are kept at zero.
    """

    __array_priority__ = 1000

    def __init__(self, space: JetSpace, coeffs: np.ndarray, order: int | None = None):
        self.space = space
        self.order = space.degree if order is None else int(order)
        c = np.asarray(coeffs)
        if self.order < space.degree:
            c = c.copy()
            c[space.size_upto[self.order]:] = 0
        self.coeffs = c

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, space: JetSpace, values, npoints: int, order: int | None = None) -> "Jet":
        c = np.zeros((space.size, npoints), dtype=complex)
        c[0] = values
        return cls(space, c, order)

    @classmethod
    def variable(cls, space: JetSpace, var: int, base, order: int | None = None) -> "Jet":
        base = np.asarray(base, dtype=complex)
        c = np.zeros((space.size, base.shape[0]), dtype=complex)
        c[0] = base
        if space.degree >= 1:
            e = [0] * space.nvars
            e[var] = 1
            c[space.index[tuple(e)]] = 1.0
        return cls(space, c, order)

    @property
    def npoints(self) -> int:
        return self.coeffs.shape[1]

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    def coefficient(self, mono) -> np.ndarray:
        return self.coeffs[self.space.index[tuple(mono)]]

    def derivative_value(self, mono) -> np.ndarray:
        """Partial derivative at the base points for multi-index ``mono``."""
        i = self.space.index[tuple(mono)]
        return self.coeffs[i] * self.space.factorials[i]

    def diff(self, var: int) -> "Jet":
        return Jet(self.space, self.space.differentiate(self.coeffs, var, self.order), self.order - 1)

    def truncate(self, order: int) -> "Jet":
        return Jet(self.space, self.coeffs, min(order, self.order))

    def conj(self) -> "Jet":
        """Jet of the complex-conjugate function (swaps dz and dzb slots)."""
        n = self.space.nvars // 2
        perm = [self.space.index[m[n:] + m[:n]] for m in self.space.monomials]
        return Jet(self.space, np.conj(self.coeffs[perm]), self.order)

    def real(self) -> "Jet":
        return 0.5 * (self + self.conj())

    # arithmetic ------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        arr = np.asarray(other)
        if arr.ndim == 0:
            arr = np.full(self.npoints, arr)
        return Jet.constant(self.space, arr, self.npoints, self.space.degree)

    def __add__(self, other):
        if not isinstance(other, Jet):
            c = self.coeffs.copy()
            c[0] = c[0] + other
            return Jet(self.space, c, self.order)
        o = other
        return Jet(self.space, self.coeffs + o.coeffs, min(self.order, o.order))

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coeffs, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            arr = np.asarray(other)
            if arr.ndim == 0:
                return Jet(self.space, self.coeffs * arr, self.order)
            return Jet(self.space, self.coeffs * arr[None, :], self.order)
        order = min(self.order, other.order)
        return Jet(self.space, self.space.multiply(self.coeffs, other.coeffs, order), order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            arr = np.asarray(other)
            if arr.ndim == 0:
                return Jet(self.space, self.coeffs / arr, self.order)
            return Jet(self.space, self.coeffs / arr[None, :], self.order)
        return self * other.power(-1.0)

    def __rtruediv__(self, other):
        return self.power(-1.0) * other

    def __pow__(self, p):
        return self.power(p)

    # series composition ------------------------------------------------------
    def compose(self, derivs) -> "Jet":
        """Evaluate ``sum_m derivs[m] / m! * (self - self(0))**m`` by Horner's rule.

        ``derivs`` is a sequence of per-point arrays ``f^(m)(base)`` for m = 0..order.
        """
        h = Jet(self.space, self.coeffs.copy(), self.order)
        h.coeffs[0] = 0
        o = self.order
        acc = Jet.constant(self.space, np.asarray(derivs[o]) / math.factorial(o), self.npoints, o)
        for m in range(o - 1, -1, -1):
            acc = acc * h
            acc.coeffs[0] += np.asarray(derivs[m]) / math.factorial(m)
        return acc

    def power(self, p) -> "Jet":
        if float(p).is_integer() and p >= 0:
            p = int(p)
            result = Jet.constant(self.space, 1.0, self.npoints, self.order)
            base = self
            while p:
                if p & 1:
                    result = result * base
                p >>= 1
                if p:
                    base = base * base
            return result
        a0 = self.value
        derivs = []
        coef = 1.0
        for m in range(self.order + 1):
            derivs.append(coef * a0 ** (p - m))
            coef *= p - m
        return self.compose(derivs)

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__":
            return NotImplemented
        if ufunc in _UNARY and len(inputs) == 1:
            return _UNARY[ufunc](inputs[0])
        binary = {
            np.add: lambda a, b: a + b,
            np.subtract: lambda a, b: a - b,
            np.multiply: lambda a, b: a * b,
            np.true_divide: lambda a, b: a / b,
            np.power: lambda a, b: a ** b,
        }
        if ufunc in binary and len(inputs) == 2:
            a, b = inputs
            if not isinstance(a, Jet):
                a = b._coerce(a)
            return binary[ufunc](a, b)
        return NotImplemented

    def __repr__(self):
        return f"Jet(nvars={self.space.nvars}, order={self.order}, points={self.npoints})"


@_implements(np.log)
def _log(x: Jet) -> Jet:
    a0 = x.value
    derivs = [np.log(a0)]
    for m in range(1, x.order + 1):
        derivs.append((-1) ** (m - 1) * math.factorial(m - 1) / a0 ** m)
    return x.compose(derivs)


@_implements(np.exp)
def _exp(x: Jet) -> Jet:
    e = np.exp(x.value)
    return x.compose([e] * (x.order + 1))


@_implements(np.sqrt)
def _sqrt(x: Jet) -> Jet:
    return x.power(0.5)


@_implements(np.reciprocal)
def _reciprocal(x: Jet) -> Jet:
    return x.power(-1.0)


@_implements(np.negative)
def _negative(x: Jet) -> Jet:
    return -x


@_implements(np.square)
def _square(x: Jet) -> Jet:
    return x * x


@_implements(np.sin)
def _sin(x: Jet) -> Jet:
    s, c = np.sin(x.value), np.cos(x.value)
    return x.compose([(s, c, -s, -c)[m % 4] for m in range(x.order + 1)])


@_implements(np.cos)
def _cos(x: Jet) -> Jet:
    s, c = np.sin(x.value), np.cos(x.value)
    return x.compose([(c, -s, -c, s)[m % 4] for m in range(x.order + 1)])


def coordinate_jets(points: np.ndarray, order: int):
    """Jets of ``z_i`` and ``conj(z_i)`` at ``points`` (shape ``(P, n)``)."""
    points = np.atleast_2d(np.asarray(points, dtype=complex))
    n = points.shape[1]
    space = jet_space(2 * n, order)
    z = [Jet.variable(space, i, points[:, i]) for i in range(n)]
    zb = [Jet.variable(space, n + i, np.conj(points[:, i])) for i in range(n)]
    return z, zb


def mixed_index(n: int, holo, anti) -> tuple:
    """Multi-index for d_{holo...} dbar_{anti...} in the ``2n`` jet variables."""
    m = [0] * (2 * n)
    for i in holo:
        m[i] += 1
    for j in anti:
        m[n + j] += 1
    return tuple(m)

