"""Explicit Kahler manifolds: charts with potential jets, quadrature, perturbations.

Every built-in model is toric: a product of projective spaces covered by the
affine chart ``C^n`` (the complement has measure zero).  Integration uses a
nested substitution that maps each projective factor's chart onto ``(0,1)^m``
in the radial variables ``t_i = |z_i|^2`` plus a trapezoid rule in each angle.
For Fubini-Study integrands of the form ``|z^a|^2 (1 + |z|^2)^(-k)`` the
substituted radial integrand is a polynomial, so Gauss-Legendre is exact.

Derivatives are taken in the standard affine atlas (see ``charts``): each
point is handled in the chart of its dominant homogeneous coordinate, so
Taylor jets stay well conditioned up to the poles.  Tensor components
returned by ``KahlerModel.metric`` are chart components; scalars are not
affected by the choice.

Models whose potential only depends on ``|z_i|^2`` are flagged ``invariant``;
for those all geometric quantities are evaluated on the radial points
(angles = 0) and broadcast to the full node set.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (DegenerateInputError, NodeMismatchError, NonPositiveMetricError,
                     QuadratureError, UnsupportedModelError)
from .charts import Factor, chart_frame, chart_jets, factor_jets_for, vertex_assignment
from .jets import Jet, mixed_index
from .parallel import map_chunks

VOLUME_RTOL = 1e-10
DEFAULT_LEVEL = 64
DEFAULT_ANGULAR_CURVE = 64
DEFAULT_ANGULAR_HIGHER = 8
JET_ORDER = 6

Expr = Callable[[list, list], object]


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Tensor rule: radial points ``t`` (with Lebesgue weights) times an angular grid.

    Node ``r * n_angular + a`` has coordinates ``sqrt(t[r]) * exp(i angles[a])`` and
    weight ``radial_w[r] * angular_w[a]`` with respect to Lebesgue measure on ``C^n``.
    """
    radial_t: np.ndarray
    radial_w: np.ndarray
    angles: np.ndarray
    angular_w: np.ndarray
    level: int
    angular: tuple

    @property
    def n(self) -> int:
        return self.radial_t.shape[1]

    @property
    def n_radial(self) -> int:
        return self.radial_t.shape[0]

    @property
    def n_angular(self) -> int:
        return self.angles.shape[0]

    @property
    def size(self) -> int:
        return self.n_radial * self.n_angular

    @property
    def radial_points(self) -> np.ndarray:
        return np.sqrt(self.radial_t).astype(complex)

    @property
    def nodes(self) -> np.ndarray:
        r = np.sqrt(self.radial_t)[:, None, :]
        phase = np.exp(1j * self.angles)[None, :, :]
        return (r * phase).reshape(-1, self.n)

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.radial_w, self.angular_w).ravel()

    @property
    def chart_ids(self) -> np.ndarray:
        return np.zeros(self.size, dtype=int)

    @property
    def angular_total(self) -> float:
        return float(np.sum(self.angular_w))


def gauss_legendre_unit(level: int):
    x, w = np.polynomial.legendre.leggauss(level)
    return 0.5 * (x + 1.0), 0.5 * w


def projective_rule(m: int, level: int = DEFAULT_LEVEL, angular: int | None = None) -> QuadratureRule:
    """Rule for the affine chart of CP^m.

    ``t_j = (1 + t_1 + ... + t_{j-1}) s_j / (1 - s_j)`` with ``s_j`` on Gauss-Legendre
    nodes in (0, 1); each ``d^2 z_j = (1/2) dt_j dtheta_j``.
    """
    if angular is None:
        angular = DEFAULT_ANGULAR_CURVE if m == 1 else DEFAULT_ANGULAR_HIGHER
    s, ws = gauss_legendre_unit(level)
    grids = np.meshgrid(*([np.arange(level)] * m), indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    t = np.zeros(idx.shape, dtype=float)
    w = np.ones(idx.shape[0])
    partial = np.ones(idx.shape[0])
    for j in range(m):
        sj = s[idx[:, j]]
        t[:, j] = partial * sj / (1.0 - sj)
        w = w * ws[idx[:, j]] * 0.5 * partial / (1.0 - sj) ** 2
        partial = partial + t[:, j]
    theta = 2.0 * np.pi * np.arange(angular) / angular
    agrids = np.meshgrid(*([theta] * m), indexing="ij")
    angles = np.stack([g.ravel() for g in agrids], axis=1)
    angular_w = np.full(angles.shape[0], (2.0 * np.pi / angular) ** m)
    return QuadratureRule(t, w, angles, angular_w, level, (angular,) * m)


def product_rule(a: QuadratureRule, b: QuadratureRule) -> QuadratureRule:
    ra, rb = a.n_radial, b.n_radial
    t = np.concatenate([np.repeat(a.radial_t, rb, axis=0), np.tile(b.radial_t, (ra, 1))], axis=1)
    w = np.repeat(a.radial_w, rb) * np.tile(b.radial_w, ra)
    aa, ab = a.n_angular, b.n_angular
    angles = np.concatenate([np.repeat(a.angles, ab, axis=0), np.tile(b.angles, (aa, 1))], axis=1)
    aw = np.repeat(a.angular_w, ab) * np.tile(b.angular_w, aa)
    return QuadratureRule(t, w, angles, aw, min(a.level, b.level), a.angular + b.angular)


# --------------------------------------------------------------------------
# charts and models
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Chart:
    """Affine chart ``Z_v != 0`` (one vertex index per factor) with the model potential."""
    vertex: tuple
    factors: tuple
    potential: Expr

    @property
    def domain(self) -> str:
        return "points whose largest homogeneous coordinate is Z_v on every factor"

    def contains(self, points: np.ndarray) -> np.ndarray:
        return np.all(vertex_assignment(self.factors, points) == np.array(self.vertex), axis=1)

    def potential_jet(self, points: np.ndarray, order: int = JET_ORDER) -> Jet:
        """Potential jet in this chart's coordinates at ``points``."""
        z, zb, _ = chart_jets(self.factors, points, order, np.array(self.vertex))
        return as_jet(self.potential(z, zb), z[0])


def as_jet(value, like: Jet) -> Jet:
    if isinstance(value, Jet):
        return value
    arr = np.broadcast_to(np.asarray(value, dtype=complex), (like.npoints,))
    return Jet.constant(like.space, arr, like.npoints)


def _metric_from_jet(jet: Jet, n: int) -> np.ndarray:
    g = np.empty((jet.npoints, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            g[:, i, j] = jet.derivative_value(mixed_index(n, [i], [j]))
    return g


class KahlerModel:
    """A Kahler manifold given by a total potential on one affine chart.

    The potential is ``base + sum(eps * term)``.  Models are immutable; derived
    data is cached in ``cache``.
    """

    def __init__(self, n: int, quadrature: QuadratureRule, base: Expr, factors: Sequence[Factor],
                 invariant: bool, name: str, terms: Sequence = (), volume_normalization: float | None = None,
                 check: bool = True):
        self.complex_dimension = int(n)
        self.quadrature = quadrature
        self.base = base
        self.terms = tuple(terms)
        self.factors = tuple(factors)
        self.invariant = bool(invariant)
        self.name = name
        if volume_normalization is None:
            volume_normalization = expected_volume(self.factors)
        self.volume_normalization = float(volume_normalization)
        self.cache: dict = {}
        self.charts = [Chart(v, self.factors, self.potential)
                       for v in itertools.product(*[range(f.dim + 1) for f in self.factors])]
        if check:
            self.validate()

    # -- basic data --------------------------------------------------------
    @property
    def n(self) -> int:
        return self.complex_dimension

    @property
    def class_degree(self) -> tuple:
        return tuple(f.degree for f in self.factors)

    @property
    def eval_kind(self) -> str:
        return "radial" if self.invariant else "nodes"

    def potential(self, z, zb):
        total = self.base(z, zb)
        for eps, term in self.terms:
            total = total + eps * term(z, zb)
        return total

    def points(self, kind: str | None = None) -> np.ndarray:
        kind = kind or self.eval_kind
        if kind == "radial":
            return self.quadrature.radial_points
        if kind == "nodes":
            return self.quadrature.nodes
        raise ValueError(f"unknown point set {kind!r}")

    def expand(self, values: np.ndarray, kind: str | None = None) -> np.ndarray:
        """Broadcast values on ``kind`` points to the full node set."""
        kind = kind or self.eval_kind
        if kind == "radial":
            return np.repeat(values, self.quadrature.n_angular, axis=0)
        return values

    def potential_jet(self, points: np.ndarray, order: int = JET_ORDER) -> Jet:
        """Potential jet at ``points``, each in its assigned chart."""
        z, zb, _ = chart_jets(self.factors, points, order)
        return as_jet(self.potential(z, zb), z[0])

    def frame(self, kind: str | None = None):
        kind = kind or self.eval_kind
        key = ("frame", kind)
        if key not in self.cache:
            self.cache[key] = chart_frame(self.factors, self.points(kind))
        return self.cache[key]

    def chart_of_node(self, node: int) -> int:
        v = tuple(vertex_assignment(self.factors, self.quadrature.nodes[node:node + 1])[0])
        return [c.vertex for c in self.charts].index(v)

    # -- metric and measure ----------------------------------------------------
    def metric(self, kind: str | None = None) -> dict:
        """Metric data at the points of ``kind``: chart components ``g``, ``ginv``, ``det``
        (real) and ``jac_det2`` converting ``det`` to affine-chart components."""
        kind = kind or self.eval_kind
        key = ("metric", kind)
        if key not in self.cache:
            pts = self.points(kind)
            n = self.n

            def block(sl):
                jet = self.potential_jet(pts[sl], 2)
                return _metric_from_jet(jet, n)

            g = map_chunks(block, pts.shape[0], chunk=8192)
            g = 0.5 * (g + np.conj(np.swapaxes(g, 1, 2)))
            det = np.real(np.linalg.det(g))
            jd2 = self.frame(kind).jac_det2
            self.cache[key] = {"g": g, "ginv": np.linalg.inv(g), "det": det, "jac_det2": jd2}
        return self.cache[key]

    @property
    def weights(self) -> np.ndarray:
        """Weights of the measure ``omega^n / n!`` at the nodes."""
        if "weights" not in self.cache:
            met = self.metric()
            det = self.expand(met["det"] * met["jac_det2"])
            self.cache["weights"] = self.quadrature.weights * det / math.pi ** self.n
        return self.cache["weights"]

    @property
    def radial_weights(self) -> np.ndarray:
        """Measure weights summed over angles (invariant models only)."""
        if not self.invariant:
            raise UnsupportedModelError("radial weights need a torus-invariant model")
        if "radial_weights" not in self.cache:
            met = self.metric("radial")
            det = met["det"] * met["jac_det2"]
            q = self.quadrature
            self.cache["radial_weights"] = q.radial_w * q.angular_total * det / math.pi ** self.n
        return self.cache["radial_weights"]

    def volume(self) -> float:
        return math.fsum(self.weights)

    def validate(self):
        for kind in {self.eval_kind}:
            g = self.metric(kind)["g"]
            eig = np.linalg.eigvalsh(g)
            lo = eig[:, 0]
            bad = np.flatnonzero(~(lo > 0))
            if bad.size:
                i = int(bad[np.argmin(np.nan_to_num(lo[bad], nan=-np.inf))])
                point = self.points(kind)[i]
                raise NonPositiveMetricError(
                    f"metric not positive definite at {kind} point {i} (z = {point}), "
                    f"smallest eigenvalue {lo[i]:.3e}", node=i, point=point, eigenvalue=float(lo[i]))
        vol = self.volume()
        rel = abs(vol - self.volume_normalization) / self.volume_normalization
        if not rel < VOLUME_RTOL:
            raise QuadratureError(
                f"volume {vol!r} differs from {self.volume_normalization!r} (rel {rel:.2e}); "
                "the potential is not in the expected class or the quadrature level is too low")

    def check_jet_symmetry(self, order: int = JET_ORDER, max_points: int = 256) -> float:
        """Largest violation of ``d^a dbar^b Phi = conj(d^b dbar^a Phi)`` on sample points."""
        pts = self.points()[:max_points]
        jet = self.potential_jet(pts, order)
        conj = jet.conj()
        return float(np.max(np.abs(jet.coeffs - conj.coeffs)))

    def with_terms(self, terms, invariant: bool, name: str) -> "KahlerModel":
        return KahlerModel(self.n, self.quadrature, self.base, self.factors, invariant, name, terms,
                           self.volume_normalization)

    def __repr__(self):
        return f"KahlerModel({self.name}, n={self.n}, nodes={self.quadrature.size})"


def expected_volume(factors: Sequence[Factor]) -> float:
    """``int omega^n / n!`` for a product of projective factors with the given degrees."""
    vol = 1.0
    for f in factors:
        vol *= f.degree ** f.dim / math.factorial(f.dim)
    return vol


# --------------------------------------------------------------------------
# scalar fields
# --------------------------------------------------------------------------
class ScalarField:
    """A function sampled at the model's quadrature nodes.

    ``expr(z, zb)`` (optional) must work on arrays and on jets; it supplies
    derivatives.  ``invariant`` marks functions of ``|z_i|^2`` only.
    """

    def __init__(self, model: KahlerModel, values, expr: Expr | None = None, invariant: bool = False,
                 name: str = ""):
        values = np.asarray(values, dtype=complex)
        if values.shape != (model.quadrature.size,):
            raise NodeMismatchError(f"field has shape {values.shape}, expected ({model.quadrature.size},)")
        self.model = model
        self.values = values
        self.expr = expr
        self.invariant = bool(invariant)
        self.name = name

    @classmethod
    def from_expr(cls, model: KahlerModel, expr: Expr, invariant: bool = False, name: str = "") -> "ScalarField":
        kind = "radial" if invariant else "nodes"
        pts = model.points(kind)
        z = [pts[:, i] for i in range(model.n)]
        zb = [np.conj(pts[:, i]) for i in range(model.n)]
        vals = np.broadcast_to(np.asarray(expr(z, zb), dtype=complex), (pts.shape[0],))
        return cls(model, model.expand(np.array(vals), kind), expr, invariant, name)

    @classmethod
    def constant(cls, model: KahlerModel, c) -> "ScalarField":
        return cls(model, np.full(model.quadrature.size, c, dtype=complex),
                   lambda z, zb, c=c: c, True, f"const({c})")

    def on(self, model: KahlerModel) -> "ScalarField":
        """Resample on another model sharing the same quadrature."""
        if model.quadrature is not self.model.quadrature:
            raise NodeMismatchError("models use different quadrature rules")
        return ScalarField(model, self.values, self.expr, self.invariant, self.name)

    @property
    def is_real(self) -> bool:
        return bool(np.max(np.abs(self.values.imag), initial=0.0) < 1e-12)

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def require_expr(self):
        if self.expr is None:
            raise DegenerateInputError(f"field {self.name or '<unnamed>'} carries no derivative data")
        return self.expr

    def jet(self, points: np.ndarray, order: int) -> Jet:
        z, zb, _ = chart_jets(self.model.factors, points, order)
        return as_jet(self.require_expr()(z, zb), z[0])

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    # arithmetic keeps expressions when both sides have them
    def _combine(self, other, op, sym):
        if isinstance(other, ScalarField):
            if other.model.quadrature is not self.model.quadrature:
                raise NodeMismatchError("fields live on different quadrature rules")
            expr = None
            if self.expr is not None and other.expr is not None:
                a, b = self.expr, other.expr
                expr = lambda z, zb: op(a(z, zb), b(z, zb))  # noqa: E731
            return ScalarField(self.model, op(self.values, other.values), expr,
                               self.invariant and other.invariant, f"({self.name}{sym}{other.name})")
        c = other
        expr = None
        if self.expr is not None:
            a = self.expr
            expr = lambda z, zb: op(a(z, zb), c)  # noqa: E731
        return ScalarField(self.model, op(self.values, c), expr, self.invariant, self.name)

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b, "+")

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b, "-")

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b, "*")

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __repr__(self):
        return f"ScalarField({self.name or 'field'}, nodes={self.values.size})"


# --------------------------------------------------------------------------
# expressions
# --------------------------------------------------------------------------
def log1p_sum(z, zb, coords) -> object:
    """``log(1 + sum_{i in coords} |z_i|^2)``.

    On chart jets of a full projective factor this is ``log|Z_v|^2 + log(sum_j H_j)``,
    whose mixed derivatives keep full relative precision.
    """
    coords = tuple(coords)
    fj = factor_jets_for(z, coords) if isinstance(z[coords[0]], Jet) else None
    if fj is not None:
        total = fj.H[0]
        for h in fj.H[1:]:
            total = total + h
        return fj.shift + np.log(total)
    s = 1.0
    for i in coords:
        s = s + z[i] * zb[i]
    return np.log(s)


def fs_expr(coords: Sequence[int], scale: float = 1.0) -> Expr:
    coords = tuple(coords)

    def expr(z, zb):
        return scale * log1p_sum(z, zb, coords)
    return expr


def _moment_power(z, zb, exps: dict, coords) -> object:
    """``prod_i x_i^{e_i}`` with ``x_i = |z_i|^2 / (1 + sum_coords |z_j|^2)``."""
    coords = tuple(coords)
    fj = factor_jets_for(z, coords) if isinstance(z[coords[0]], Jet) else None
    if fj is not None:
        total = fj.H[0]
        for h in fj.H[1:]:
            total = total + h
        inv = 1.0 / total
        out = 1.0
        for i, e in exps.items():
            if e:
                out = out * (fj.H[i - fj.factor.offset + 1] * inv) ** e
        return out
    s = 1.0
    for j in coords:
        s = s + z[j] * zb[j]
    out = 1.0
    for i, e in exps.items():
        if e:
            out = out * (z[i] * zb[i] / s) ** e
    return out


def moment_expr(i: int, coords: Sequence[int]) -> Expr:
    """Moment coordinate ``|z_i|^2 / (1 + sum |z_j|^2)`` on the factor spanned by ``coords``."""
    coords = tuple(coords)

    def expr(z, zb):
        return _moment_power(z, zb, {i: 1}, coords)
    return expr


def height_expr(i: int = 0) -> Expr:
    """``(1 - |z|^2) / (1 + |z|^2)``, the height function of the round sphere."""
    def expr(z, zb):
        return 1.0 - 2.0 * _moment_power(z, zb, {i: 1}, (i,))
    return expr


def radial_basis_expr(m: int, i: int = 0) -> Expr:
    """``t / (1 + t)^m = x (1 - x)^(m-1)`` with ``t = |z_i|^2``, ``x = t / (1 + t)``."""
    def expr(z, zb):
        x = _moment_power(z, zb, {i: 1}, (i,))
        return x * (1.0 - x) ** (m - 1)
    return expr


def monomial_expr(exponents: Sequence[int], factor: Factor) -> Expr:
    """Product of moment coordinates ``x_i^{e_i}`` on one projective factor."""
    coords = tuple(factor.coords)
    exps = dict(zip(coords, exponents))

    def expr(z, zb):
        return _moment_power(z, zb, exps, coords)
    return expr


def polynomial_expr(terms: Sequence[tuple]) -> Expr:
    """Sum of ``coef * z^a * zb^b`` for terms ``(coef, a, b)``; generally not invariant."""
    terms = tuple((complex(c), tuple(a), tuple(b)) for c, a, b in terms)

    def expr(z, zb):
        out = 0.0
        for c, a, b in terms:
            m = c
            for i, e in enumerate(a):
                if e:
                    m = m * z[i] ** e
            for i, e in enumerate(b):
                if e:
                    m = m * zb[i] ** e
            out = out + m
        return out
    return expr


def factor_basis(factor: Factor, size: int) -> list:
    """Invariant perturbation basis on one factor, as ``(label, expr)`` pairs.

    CP^1: ``t/(1+t)^m`` for m = 2..size+1.  CP^m, m >= 2: moment-coordinate
    monomials of increasing degree, constant excluded.
    """
    if factor.dim == 1:
        i = factor.offset
        return [(f"t/(1+t)^{m}", radial_basis_expr(m, i)) for m in range(2, size + 2)]
    out = []
    deg = 1
    while len(out) < size:
        for exps in _compositions(deg, factor.dim):
            label = "*".join(f"x{factor.offset + j + 1}^{e}" for j, e in enumerate(exps) if e)
            out.append((label, monomial_expr(exps, factor)))
            if len(out) == size:
                break
        deg += 1
    return out


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def perturbation_basis(model: KahlerModel, size: int) -> list:
    """Class-preserving invariant basis of potential perturbations.

    Products use tensor products of the factor bases with the constant adjoined,
    leaving out the pure constant.
    """
    if len(model.factors) == 1:
        return factor_basis(model.factors[0], size)
    pieces = [[("1", None)] + factor_basis(f, size) for f in model.factors]
    out = []
    for combo in _product(pieces):
        if all(e is None for _, e in combo):
            continue
        label = "(x)".join(lbl for lbl, _ in combo)
        exprs = [e for _, e in combo if e is not None]
        out.append((label, _product_expr(exprs)))
    return out


def _product(lists):
    if not lists:
        yield ()
        return
    for item in lists[0]:
        for rest in _product(lists[1:]):
            yield (item,) + rest


def _product_expr(exprs):
    exprs = tuple(exprs)

    def expr(z, zb):
        out = 1.0
        for e in exprs:
            out = out * e(z, zb)
        return out
    return expr


def linear_combination(coeffs: Sequence[float], exprs: Sequence[Expr]) -> Expr:
    pairs = tuple((float(c), e) for c, e in zip(coeffs, exprs) if c != 0)

    def expr(z, zb):
        out = 0.0
        for c, e in pairs:
            out = out + c * e(z, zb)
        return out
    return expr


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------
def default_level(n: int) -> int:
    return DEFAULT_LEVEL if n <= 2 else 16


def make_fubini_study(n: int, scale: float = 1.0, level: int | None = None,
                      angular: int | None = None) -> KahlerModel:
    """Fubini-Study metric ``scale * log(1 + |z|^2)`` on CP^n, 1 <= n <= 3."""
    if not (isinstance(n, (int, np.integer)) and 1 <= n <= 3):
        raise UnsupportedModelError(f"make_fubini_study supports 1 <= n <= 3, got {n!r}")
    if not scale > 0:
        raise ValueError("scale must be positive")
    level = default_level(n) if level is None else level
    rule = projective_rule(n, level, angular)
    factor = Factor(0, n, float(scale))
    return KahlerModel(n, rule, fs_expr(range(n), scale), [factor], True, f"fs{n}")


def _central_derivatives(u, t: np.ndarray, order: int, h0: float):
    """Derivatives ``u^(m)(t)``, m = 0..order, by central differences.

    The step for order m is ``h0 * (m + 1) * (1 + t)``; two Richardson steps
    (h, h/2, h/4) remove the h^2 and h^4 error terms.
    """
    def central(m, h):
        acc = np.zeros_like(t)
        for j in range(m + 1):
            acc = acc + (-1) ** j * math.comb(m, j) * np.asarray(u(t + (m / 2 - j) * h), dtype=float)
        return acc / h ** m

    out = [np.asarray(u(t), dtype=float)]
    for m in range(1, order + 1):
        h = h0 * (m + 1) * (1.0 + t)
        a, b, c = central(m, h), central(m, h / 2), central(m, h / 4)
        r1, r2 = (4 * b - a) / 3, (4 * c - b) / 3
        out.append((16 * r2 - r1) / 15)
    return out


def profile_expr(u: Callable, jets: str = "auto", h: float = 1e-2) -> Expr:
    """Potential ``u(|z|^2)`` on C.

    ``jets="analytic"`` requires ``u`` to accept jets (numpy ufunc arithmetic).
    ``"fd"`` differentiates the bounded part ``psi = u - log(1 + t)`` numerically in
    ``t`` (steps up to ``7 h (1 + t)``, so ``u`` must be defined on ``t > -0.1``) and
    adds the Fubini-Study part exactly.  ``"auto"`` tries analytic first.
    """
    def psi(t):
        return np.asarray(u(t), dtype=float) - np.log1p(t)

    def fd_expr(z, zb):
        t = z[0] * zb[0]
        if not isinstance(t, Jet):
            return u(np.real(t))
        base = np.real(t.value)
        return log1p_sum(z, zb, (0,)) + t.compose(_central_derivatives(psi, base, t.order, h))

    def analytic_expr(z, zb):
        return u(z[0] * zb[0])

    if jets == "fd":
        return fd_expr
    if jets == "analytic":
        return analytic_expr
    if jets != "auto":
        raise ValueError(f"unknown jet mode {jets!r}")
    try:
        probe = chart_jets([Factor(0, 1, 1.0)], np.array([[0.3 + 0.1j]]), 2)
        val = u(probe[0][0] * probe[1][0])
        return analytic_expr if isinstance(val, Jet) else fd_expr
    except Exception:  # profile not jet-aware
        return fd_expr


def make_u1_sphere(profile: Callable, level: int = DEFAULT_LEVEL, angular: int | None = None,
                   jets: str = "auto", name: str = "u1") -> KahlerModel:
    """S^1-invariant metric on CP^1 with potential ``u(|z|^2)`` in the Fubini-Study class.

    Smoothness at the poles needs ``u`` smooth in ``t`` at 0 and ``u(t) - log t``
    smooth in ``1/t`` at infinity; the class condition ``t u'(t) -> 1`` is
    enforced through the volume check.
    """
    rule = projective_rule(1, level, angular)
    return KahlerModel(1, rule, profile_expr(profile, jets), [Factor(0, 1, 1.0)], True, name)


def product_model(a: KahlerModel, b: KahlerModel) -> KahlerModel:
    """Riemannian product; block-diagonal metric on the concatenated coordinates."""
    na = a.n
    rule = product_rule(a.quadrature, b.quadrature)

    def shifted(expr):
        return lambda z, zb: expr(z[na:], zb[na:])

    pa, pb = a.potential, shifted(b.potential)
    factors = list(a.factors) + [Factor(f.offset + na, f.dim, f.degree) for f in b.factors]
    base = lambda z, zb: pa(z[:na], zb[:na]) + pb(z, zb)  # noqa: E731
    return KahlerModel(na + b.n, rule, base, factors, a.invariant and b.invariant, f"{a.name}x{b.name}")


def perturb(model: KahlerModel, bump: ScalarField, epsilon: float) -> KahlerModel:
    """Potential shifted by ``epsilon * bump`` (same class, same quadrature)."""
    if bump.model.quadrature is not model.quadrature:
        raise NodeMismatchError("bump is sampled on a different quadrature")
    expr = bump.require_expr()
    if epsilon == 0:
        return model
    return model.with_terms(model.terms + ((float(epsilon), expr),), model.invariant and bump.invariant,
                            f"{model.name}+{epsilon:g}*{bump.name or 'bump'}")


def integrate(model: KahlerModel, field: ScalarField | np.ndarray) -> complex:
    """``int f omega^n / n!`` by compensated summation in a fixed order."""
    if isinstance(field, ScalarField):
        if field.model.quadrature is not model.quadrature:
            raise NodeMismatchError("field is sampled on a different quadrature")
        values = field.values
    else:
        values = np.asarray(field)
    if values.shape != (model.quadrature.size,):
        raise NodeMismatchError(f"field has shape {values.shape}, expected ({model.quadrature.size},)")
    prod = values * model.weights
    re = math.fsum(np.real(prod))
    im = math.fsum(np.imag(prod)) if np.iscomplexobj(prod) else 0.0
    return complex(re, im)


def integrate_radial(model: KahlerModel, values: np.ndarray) -> float:
    """Integral of an invariant function given on the radial points."""
    return math.fsum(np.real(values) * model.radial_weights)


def moment_coordinates(model: KahlerModel, kind: str | None = None) -> np.ndarray:
    """Moment-map coordinates ``x_i`` at the points of ``kind`` (shape ``(P, n)``)."""
    pts = model.points(kind)
    t = np.abs(pts) ** 2
    out = np.empty_like(t)
    for f in model.factors:
        cs = list(f.coords)
        out[:, cs] = t[:, cs] / (1.0 + t[:, cs].sum(axis=1, keepdims=True))
    return out


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------
MODEL_KEYS = ("manifold", "scale", "profile", "quadrature_level", "epsilon", "angular_level")
DEFAULT_FS2_PROFILE = (0.0, -0.5, 1.0, 1.0)  # -0.5 x2 + x1^2 + x1 x2


def model_from_config(cfg: dict) -> KahlerModel:
    """Build a model from flat keys ``manifold``, ``scale``, ``profile``,
    ``quadrature_level``, ``epsilon`` (and optional ``angular_level``)."""
    unknown = set(cfg) - set(MODEL_KEYS)
    if unknown:
        raise KeyError(sorted(unknown)[0])
    kind = str(cfg.get("manifold", "fs1")).strip()
    scale = float(cfg.get("scale", 1.0))
    level = cfg.get("quadrature_level")
    level = int(level) if level not in (None, "") else None
    angular = cfg.get("angular_level")
    angular = int(angular) if angular not in (None, "") else None
    eps = float(cfg.get("epsilon", 0.0))
    profile = cfg.get("profile")
    if isinstance(profile, str):
        profile = [float(x) for x in profile.replace(",", " ").split()] if profile.strip() else None

    if kind == "fs1":
        model = make_fubini_study(1, scale, level, angular)
    elif kind == "fs2":
        model = make_fubini_study(2, scale, level, angular)
    elif kind == "fs1xfs1":
        lv = 32 if level is None else level
        factor = make_fubini_study(1, scale, lv, angular or DEFAULT_ANGULAR_HIGHER)
        model = product_model(factor, factor)
    elif kind == "u1profile":
        coeffs = list(profile or [1.0])
        basis = [radial_basis_expr(m) for m in range(2, len(coeffs) + 2)]

        def u(t, coeffs=coeffs, basis=basis):
            out = np.log(1.0 + t)
            for c, m in zip(coeffs, range(2, len(coeffs) + 2)):
                out = out + eps * c * t / (1.0 + t) ** m
            return out
        return make_u1_sphere(u, level or DEFAULT_LEVEL, angular, name="u1profile")
    else:
        raise UnsupportedModelError(f"unknown manifold {kind!r}")

    if eps == 0.0:
        return model
    if profile is None:
        profile = DEFAULT_FS2_PROFILE if kind == "fs2" else [1.0]
    basis = perturbation_basis(model, len(profile))
    expr = linear_combination(profile, [e for _, e in basis])
    bump = ScalarField.from_expr(model, expr, invariant=True, name="profile")
    return perturb(model, bump, eps)
