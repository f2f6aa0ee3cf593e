"""Todd polynomials in Chern characters and the densities t_j, l_j, Z_j.

Densities are ratios of forms against ``omega^n``; integrals reported here
are taken against ``omega^n`` (``n!`` times the model measure).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .charts import Factor
from .curvature import (HermitianEndomorphismField, curvature_batch, hessian_pairing, identity_endomorphism,
                        ricci_endomorphism)
from .errors import DegenerateInputError, UnsupportedModelError
from .manifold import KahlerModel, ScalarField, integrate

MAX_TODD_DEGREE = 3


# --------------------------------------------------------------------------
# exact power series helpers
# --------------------------------------------------------------------------
def _series_mul(a: list, b: list, deg: int) -> list:
    out = [Fraction(0)] * (deg + 1)
    for i, x in enumerate(a[:deg + 1]):
        if x:
            for j, y in enumerate(b[:deg + 1 - i]):
                out[i + j] += x * y
    return out


def _series_inv(a: list, deg: int) -> list:
    out = [Fraction(0)] * (deg + 1)
    out[0] = 1 / a[0]
    for k in range(1, deg + 1):
        acc = sum((a[i] * out[k - i] for i in range(1, k + 1) if i < len(a)), Fraction(0))
        out[k] = -acc / a[0]
    return out


def _series_log1p(g: list, deg: int) -> list:
    """log(1 + g) for g with zero constant term."""
    out = [Fraction(0)] * (deg + 1)
    power = [Fraction(1)] + [Fraction(0)] * deg
    for m in range(1, deg + 1):
        power = _series_mul(power, g, deg)
        for k in range(deg + 1):
            out[k] += Fraction((-1) ** (m - 1), m) * power[k]
    return out


def todd_generator_series(deg: int) -> list:
    """Coefficients of ``x / (1 - exp(-x))`` up to ``x^deg``."""
    denom = [Fraction((-1) ** k, math.factorial(k + 1)) for k in range(deg + 1)]
    return _series_inv(denom, deg)


def log_todd_coefficients(deg: int) -> list:
    """``b_m`` with ``log(x / (1 - exp(-x))) = sum_m b_m x^m``."""
    f = todd_generator_series(deg)
    g = [Fraction(0)] + f[1:]
    return _series_log1p(g, deg)


# --------------------------------------------------------------------------
# CharPoly
# --------------------------------------------------------------------------
class CharPoly:
    """Polynomial in Chern characters ``ch_1, ch_2, ...`` with exact rational coefficients.

    Monomials are sorted tuples of degrees, e.g. ``(1, 1)`` for ``ch_1^2`` and ``()`` for 1.
    """

    def __init__(self, terms: dict | None = None):
        self.terms = {}
        for mono, c in (terms or {}).items():
            c = Fraction(c)
            if c:
                key = tuple(sorted(mono, reverse=True))
                self.terms[key] = self.terms.get(key, Fraction(0)) + c

    def __getitem__(self, mono) -> Fraction:
        return self.terms.get(tuple(sorted(mono, reverse=True)), Fraction(0))

    def items(self):
        return sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), kv[0]))

    @property
    def degrees(self) -> set:
        return {sum(m) for m in self.terms}

    def is_homogeneous(self) -> bool:
        return len(self.degrees) <= 1

    def __add__(self, other: "CharPoly") -> "CharPoly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, Fraction(0)) + c
        return CharPoly(out)

    def __mul__(self, other):
        if not isinstance(other, CharPoly):
            return CharPoly({m: c * Fraction(other) for m, c in self.terms.items()})
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                key = tuple(sorted(m1 + m2, reverse=True))
                out[key] = out.get(key, Fraction(0)) + c1 * c2
        return CharPoly(out)

    __rmul__ = __mul__

    def truncate(self, deg: int) -> "CharPoly":
        return CharPoly({m: c for m, c in self.terms.items() if sum(m) <= deg})

    def homogeneous_part(self, deg: int) -> "CharPoly":
        return CharPoly({m: c for m, c in self.terms.items() if sum(m) == deg})

    def evaluate(self, ch: dict):
        """Substitute values (numbers, arrays or ring elements) for ``ch_k``; ``ch`` maps k -> value."""
        total = 0
        for mono, c in self.items():
            term = c
            for k in mono:
                term = term * ch[k]
            total = total + term
        return total

    def __eq__(self, other):
        return isinstance(other, CharPoly) and self.terms == other.terms

    def __repr__(self):
        if not self.terms:
            return "CharPoly(0)"
        parts = []
        for mono, c in self.items():
            name = "*".join(f"ch{k}" for k in mono) or "1"
            parts.append(f"{c}*{name}")
        return "CharPoly(" + " + ".join(parts) + ")"


def todd_in_chern_characters(j: int) -> CharPoly:
    """Degree-j Todd polynomial, ``Td = exp(sum_m b_m m! ch_m)``."""
    if not (isinstance(j, (int, np.integer)) and 0 <= j <= MAX_TODD_DEGREE):
        raise ValueError(f"Todd degree must be in 0..{MAX_TODD_DEGREE}, got {j!r}")
    b = log_todd_coefficients(j)
    log_td = CharPoly({(m,): b[m] * math.factorial(m) for m in range(1, j + 1)})
    total = CharPoly({(): 1})
    power = CharPoly({(): 1})
    for r in range(1, j + 1):
        power = (power * log_td).truncate(j)
        total = total + power * Fraction(1, math.factorial(r))
    return total.homogeneous_part(j)


# --------------------------------------------------------------------------
# pointwise densities
# --------------------------------------------------------------------------
def _scalars(model: KahlerModel, kind: str | None = None) -> dict:
    c = curvature_batch(model, kind)
    return {k: c[k] for k in ("scalar", "norm_R_sq", "norm_ric_sq", "delta_scalar")}


def _pair_factor(model: KahlerModel) -> float:
    n = model.n
    if n < 2:
        raise DegenerateInputError(f"degree-2 densities need complex dimension >= 2, model has {n}")
    return float(n * (n - 1))


def monomial_t_density(model: KahlerModel, mono: tuple, c: dict | None = None) -> np.ndarray:
    """``ch_mono omega^(n-|mono|) / omega^n`` (closed-form part, no derivative terms)."""
    c = c or _scalars(model)
    n = model.n
    mono = tuple(sorted(mono, reverse=True))
    if mono == ():
        return np.ones_like(c["scalar"])
    if mono == (1,):
        return c["scalar"] / n
    if mono == (2,):
        return (c["norm_ric_sq"] - c["norm_R_sq"]) / (2.0 * _pair_factor(model))
    if mono == (1, 1):
        return (c["scalar"] ** 2 - c["norm_ric_sq"]) / _pair_factor(model)
    raise UnsupportedModelError(f"no closed form for monomial {mono}")


def monomial_endomorphisms(model: KahlerModel, mono: tuple) -> list:
    """Endomorphism fields ``l^k_m`` whose weak adjoint terms make up ``l_k``."""
    mono = tuple(sorted(mono, reverse=True))
    n = model.n
    if mono == ():
        return []
    if mono == (1,):
        return [identity_endomorphism(model) * (1.0 / n)]
    if mono == (2,):
        return [ricci_endomorphism(model) * (1.0 / _pair_factor(model))]
    if mono == (1, 1):
        scale = 1.0 / _pair_factor(model)

        def build(kind):
            S = curvature_batch(model, kind)["scalar"]
            eye = np.eye(n, dtype=complex)
            return (scale * S)[:, None, None] * eye
        e = HermitianEndomorphismField(model, build, "S*Id")
        return [e, e]
    raise UnsupportedModelError(f"no endomorphism list for monomial {mono}")


def monomial_full_density(model: KahlerModel, mono: tuple, c: dict | None = None) -> np.ndarray:
    """Closed-form ``t + l`` for one monomial (``l`` written with ``Delta S``)."""
    c = c or _scalars(model)
    mono = tuple(sorted(mono, reverse=True))
    t = monomial_t_density(model, mono, c)
    if mono == (2,):
        return t - c["delta_scalar"] / _pair_factor(model)
    if mono == (1, 1):
        return t - 2.0 * c["delta_scalar"] / _pair_factor(model)
    return t


def _check_j(model: KahlerModel, j: int, max_j: int = 2):
    if not 0 <= j <= max_j:
        raise ValueError(f"j must be in 0..{max_j}, got {j}")
    if j > model.n:
        raise DegenerateInputError(f"j = {j} exceeds the complex dimension {model.n}")


def t_tilde_values(model: KahlerModel, j: int) -> np.ndarray:
    _check_j(model, j)
    c = _scalars(model)
    td = todd_in_chern_characters(j)
    return sum((float(coef) * monomial_t_density(model, mono, c) for mono, coef in td.items()),
               np.zeros_like(c["scalar"]))


def t_tilde(model: KahlerModel, node: int, j: int) -> float:
    """``Td_j(TM) omega^(n-j) / omega^n`` at a quadrature node."""
    return float(model.expand(t_tilde_values(model, j))[node])


def ell_tilde_weak(model: KahlerModel, j: int, f: ScalarField) -> float:
    """``int f l_j omega^n`` via ``-sum_m int <ddbar f, l^k_m> omega^n`` (no adjoints formed)."""
    if j > 2:
        raise ValueError("adjoint terms are implemented for j <= 2 only")
    _check_j(model, j)
    total = 0.0
    for mono, coef in todd_in_chern_characters(j).items():
        for endo in monomial_endomorphisms(model, mono):
            total -= float(coef) * hessian_pairing(model, f, endo).real
    return total * math.factorial(model.n)


def ell_tilde_values(model: KahlerModel, j: int) -> np.ndarray:
    """Closed-form pointwise ``l_j`` (only ``Delta S`` terms survive for j <= 2)."""
    return z_density_values(model, j) - t_tilde_values(model, j)


def z_density_values(model: KahlerModel, j: int, kind: str | None = None) -> np.ndarray:
    _check_j(model, j)
    c = _scalars(model, kind)
    n = model.n
    if j == 0:
        return np.ones_like(c["scalar"])
    if j == 1:
        return c["scalar"] / (2.0 * n)
    nn = _pair_factor(model)
    return (-c["delta_scalar"] / 6.0
            + (c["norm_R_sq"] - 4.0 * c["norm_ric_sq"] + 3.0 * c["scalar"] ** 2) / 24.0) / nn


def z_density(model: KahlerModel, node: int, j: int) -> float:
    """``Z_0 = 1``, ``n Z_1 = S/2``, ``n(n-1) Z_2 = -Delta S/6 + (|R|^2 - 4|Ric|^2 + 3 S^2)/24``."""
    return float(model.expand(z_density_values(model, j))[node])


def z_field(model: KahlerModel, j: int) -> ScalarField:
    return ScalarField(model, model.expand(z_density_values(model, j)), None, model.invariant, f"Z{j}")


def td2_recombination_residual(model: KahlerModel) -> float:
    """``max | -(1/12) ch2 + (1/8) c1^2 - Z_2 |`` over the evaluation points."""
    c = _scalars(model)
    nn = _pair_factor(model)
    ch2 = (-c["delta_scalar"] - 0.5 * c["norm_R_sq"] + 0.5 * c["norm_ric_sq"]) / nn
    c1sq = (-2.0 * c["delta_scalar"] + c["scalar"] ** 2 - c["norm_ric_sq"]) / nn
    return float(np.max(np.abs(-ch2 / 12.0 + c1sq / 8.0 - z_density_values(model, 2))))


# --------------------------------------------------------------------------
# topological side
# --------------------------------------------------------------------------
class _CohomologyRing:
    """Truncated polynomial ring Q[H_1..H_r] / (H_f^(m_f+1)) of a product of projective spaces."""

    def __init__(self, dims: Sequence[int]):
        self.dims = tuple(dims)

    def gen(self, f: int) -> dict:
        e = [0] * len(self.dims)
        e[f] = 1
        return {tuple(e): Fraction(1)}

    def const(self, c) -> dict:
        return {(0,) * len(self.dims): Fraction(c)}

    def add(self, a: dict, b: dict) -> dict:
        out = dict(a)
        for k, v in b.items():
            out[k] = out.get(k, Fraction(0)) + v
        return out

    def scale(self, a: dict, c) -> dict:
        return {k: v * Fraction(c) for k, v in a.items()}

    def mul(self, a: dict, b: dict) -> dict:
        out = {}
        for ka, va in a.items():
            for kb, vb in b.items():
                k = tuple(x + y for x, y in zip(ka, kb))
                if all(e <= m for e, m in zip(k, self.dims)):
                    out[k] = out.get(k, Fraction(0)) + va * vb
        return out

    def power(self, a: dict, p: int) -> dict:
        out = self.const(1)
        for _ in range(p):
            out = self.mul(out, a)
        return out

    def integrate(self, a: dict) -> Fraction:
        return a.get(self.dims, Fraction(0))


class _RingElement:
    """Adapter so ``CharPoly.evaluate`` works over the cohomology ring."""

    def __init__(self, ring, value):
        self.ring, self.value = ring, value

    def __mul__(self, other):
        if isinstance(other, _RingElement):
            return _RingElement(self.ring, self.ring.mul(self.value, other.value))
        return _RingElement(self.ring, self.ring.scale(self.value, other))

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, _RingElement):
            other = _RingElement(self.ring, self.ring.const(other))
        return _RingElement(self.ring, self.ring.add(self.value, other.value))

    __radd__ = __add__


# factor dimensions -> (c1, c2) as coefficient dicts over H-exponents
CHERN_TABLE = {
    (1,): {"c1": {(1,): 2}, "c2": {}},
    (2,): {"c1": {(1,): 3}, "c2": {(2,): 3}},
    (1, 1): {"c1": {(1, 0): 2, (0, 1): 2}, "c2": {(1, 1): 4}},
}


def topological_integral(factors: Sequence[Factor], j: int) -> Fraction:
    """``int Td_j(M) [omega]^(n-j)`` with ``[omega] = sum_f degree_f H_f``."""
    dims = tuple(f.dim for f in factors)
    if dims not in CHERN_TABLE:
        raise UnsupportedModelError(f"no Chern data for a product of CP^m with m = {dims}")
    ring = _CohomologyRing(dims)
    entry = CHERN_TABLE[dims]
    c1 = {k: Fraction(v) for k, v in entry["c1"].items()}
    c2 = {k: Fraction(v) for k, v in entry["c2"].items()}
    ch = {1: _RingElement(ring, c1),
          2: _RingElement(ring, ring.scale(ring.add(ring.mul(c1, c1), ring.scale(c2, -2)), Fraction(1, 2)))}
    if j > 2:
        raise ValueError("topological integrals are tabulated for j <= 2")
    omega = ring.const(0)
    for idx, f in enumerate(factors):
        omega = ring.add(omega, ring.scale(ring.gen(idx), Fraction(f.degree).limit_denominator(10 ** 6)))
    td = todd_in_chern_characters(j).evaluate(ch)
    td_val = td.value if isinstance(td, _RingElement) else ring.const(td)
    n = sum(dims)
    return ring.integrate(ring.mul(td_val, ring.power(omega, n - j)))


@dataclass
class DensityReport:
    j: int
    t_tilde: ScalarField
    ell_tilde: ScalarField
    z: ScalarField
    integral: float
    topological_value: float
    tolerance: float = 1e-6
    extras: dict = field(default_factory=dict)

    @property
    def deviation(self) -> float:
        return abs(self.integral - self.topological_value)

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance


def z_integral_check(model: KahlerModel, j: int, tolerance: float = 1e-6) -> DensityReport:
    """Compare ``int Z_j omega^n`` with ``int Td_j [omega]^(n-j)``."""
    _check_j(model, j)
    topo = topological_integral(model.factors, j)
    zv = model.expand(z_density_values(model, j))
    tv = model.expand(t_tilde_values(model, j))
    integral = integrate(model, zv).real * math.factorial(model.n)
    mk = lambda v, name: ScalarField(model, v, None, model.invariant, name)  # noqa: E731
    return DensityReport(j, mk(tv, f"t{j}"), mk(zv - tv, f"l{j}"), mk(zv, f"Z{j}"), integral, float(topo),
                         tolerance)
