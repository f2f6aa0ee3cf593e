"""Holomorphic sections of L^k, Gram matrices, Bergman densities and operators.

Sections of ``L^k`` on a product of projective factors are monomials ``z^alpha``
with ``|alpha_f| <= k d_f`` per factor.  Everything is evaluated through the
normalized values ``sigma_a = s_a exp(-k Phi / 2)`` so that ``|sigma_a|^2`` is the
pointwise norm for the weight ``h^k e^{-k phi}``.

Gram convention: ``G[a, b] = int s_a conj(s_b) e^{-k Phi} omega^n/n!``.
Operator matrices are ``Q[i, j] = <A e_j, e_i>`` in an orthonormal basis.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .charts import chart_jets, vertex_assignment
from .conventions import DONALDSON_SIGN
from .curvature import field_kind, laplacian
from .errors import ConditioningError, DegenerateInputError, FitError, QuadratureError, UnsupportedModelError
from .jets import Jet, mixed_index
from .manifold import KahlerModel, ScalarField, as_jet, integrate, integrate_radial, perturb
from .parallel import map_chunks

MAX_CONDITION = 1e12


# --------------------------------------------------------------------------
# sections
# --------------------------------------------------------------------------
def _factor_degree(model: KahlerModel, k: int, f) -> int:
    kd = k * f.degree
    if abs(kd - round(kd)) > 1e-12:
        raise UnsupportedModelError(f"k * degree = {kd} is not an integer; L^k is not a line bundle here")
    return int(round(kd))


def _exponents(dim: int, top: int) -> list:
    out = []
    for total in range(top + 1):
        for combo in itertools.product(range(total + 1), repeat=dim):
            if sum(combo) == total:
                out.append(combo)
    return out


@dataclass
class SectionBasis:
    """Monomial basis of ``H^0(M, L^k)``.

    ``exponents[a]`` is the affine exponent vector of section ``a``; ``homogeneous[a][f]``
    lists the homogeneous exponents ``(k d_f - |alpha_f|, alpha_f)`` on factor ``f``.
    """
    model: KahlerModel
    k: int
    exponents: np.ndarray
    homogeneous: list
    factor_degrees: tuple

    @property
    def dimension(self) -> int:
        return self.exponents.shape[0]

    def normalized_values(self, kind: str | None = None, model: KahlerModel | None = None) -> np.ndarray:
        """``sigma[p, a] = z^alpha exp(-k Phi / 2)`` at the points of ``kind`` (shape ``(P, d)``)."""
        model = model or self.model
        pts = model.points(kind)
        return self._values_at(pts, model)

    def _values_at(self, pts: np.ndarray, model: KahlerModel) -> np.ndarray:
        z = [pts[:, i] for i in range(model.n)]
        zb = [np.conj(pts[:, i]) for i in range(model.n)]
        phi = np.real(np.broadcast_to(np.asarray(model.potential(z, zb), dtype=complex), (pts.shape[0],)))
        logz = np.log(pts)                                   # nodes never sit on coordinate planes
        expo = logz @ self.exponents.T.astype(float) - 0.5 * self.k * phi[:, None]
        return np.exp(expo)

    def norms_sq(self, kind: str | None = None) -> np.ndarray:
        return np.abs(self.normalized_values(kind)) ** 2

    def __len__(self):
        return self.dimension


def section_basis(model: KahlerModel, k: int) -> SectionBasis:
    """Monomials ``z^alpha`` with ``|alpha_f| <= k d_f`` on every factor."""
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if not model.factors:
        raise UnsupportedModelError("model has no projective factors")
    per_factor = []
    tops = []
    for f in model.factors:
        top = _factor_degree(model, k, f)
        tops.append(top)
        per_factor.append(_exponents(f.dim, top))
    exps, homs = [], []
    for combo in itertools.product(*per_factor):
        exps.append([e for part in combo for e in part])
        homs.append([(top - sum(part),) + tuple(part) for top, part in zip(tops, combo)])
    return SectionBasis(model, int(k), np.array(exps, dtype=int), homs, tuple(tops))


def expected_dimension(model: KahlerModel, k: int) -> int:
    return math.prod(math.comb(f.dim + _factor_degree(model, k, f), f.dim) for f in model.factors)


# --------------------------------------------------------------------------
# Gram matrices
# --------------------------------------------------------------------------
@dataclass
class GramMatrix:
    """``matrix[a, b] = <s_a, s_b>``; ``diagonal`` marks the torus-invariant fast path."""
    matrix: np.ndarray
    model: KahlerModel
    k: int
    basis: SectionBasis
    diagonal: bool
    phi: ScalarField | None = None
    _coeffs: np.ndarray | None = field(default=None, repr=False)
    condition: float = float("nan")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def hermitian_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def log_det(self) -> float:
        if self.diagonal:
            return math.fsum(np.log(np.real(np.diag(self.matrix))))
        sign, ld = np.linalg.slogdet(self.matrix)
        if not np.real(sign) > 0:
            raise ConditioningError("Gram determinant is not positive")
        return float(ld)

    def orthonormal_coefficients(self) -> np.ndarray:
        """``C`` with ``e_j = sum_a C[a, j] s_a`` orthonormal.

        Symmetric equilibration, then a Hermitian eigendecomposition with inverse square root.
        """
        if self._coeffs is None:
            diag = np.real(np.diag(self.matrix))
            if not np.all(diag > 0):
                raise ConditioningError("Gram matrix has non-positive diagonal entries; "
                                        "raise the quadrature level or lower k")
            D = 1.0 / np.sqrt(diag)
            if self.diagonal:
                self.condition = 1.0
                self._coeffs = np.diag(D).astype(complex)
            else:
                K = np.conj(self.matrix) * D[:, None] * D[None, :]   # K[a, b] = <s_b, s_a>
                K = 0.5 * (K + K.conj().T)
                lam, V = np.linalg.eigh(K)
                self.condition = float(lam[-1] / lam[0]) if lam[0] > 0 else float("inf")
                if not (lam[0] > 0 and self.condition <= MAX_CONDITION):
                    raise ConditioningError(
                        f"Gram condition number {self.condition:.3e} exceeds {MAX_CONDITION:.0e}; "
                        "use a larger quadrature level or a smaller k")
                self._coeffs = (D[:, None] * V) / np.sqrt(lam)[None, :]
        return self._coeffs


def _dense_allowed(model: KahlerModel, basis: SectionBasis):
    """Trapezoid rule in each angle integrates ``e^{i m theta}`` exactly only for ``|m| < N``."""
    for f, top in zip(model.factors, basis.factor_degrees):
        for c in f.coords:
            N = model.quadrature.angular[c]
            if top >= N:
                raise QuadratureError(f"angular grid of {N} nodes aliases monomial products of degree {top}; "
                                      "raise angular_level above k * degree")


def _model_with_phi(model: KahlerModel, phi: ScalarField | None) -> KahlerModel:
    if phi is None:
        return model
    return perturb(model, phi, 1.0)


def _chunk_gram(sig: np.ndarray, w: np.ndarray) -> np.ndarray:
    return (sig * w[:, None]).T @ np.conj(sig)


def _dense_sum(fn, npoints: int, chunk: int = 4096) -> np.ndarray:
    parts = map_chunks(lambda sl: fn(sl)[None], npoints, chunk)
    return np.sum(parts, axis=0)                      # fixed chunk order, independent of worker count


def gram(model: KahlerModel, k: int, phi: ScalarField | None = None, dense: bool = False) -> GramMatrix:
    """``int s_a conj(s_b) h^k e^{-k phi} omega_phi^n / n!`` for the monomial basis."""
    mphi = _model_with_phi(model, phi)
    basis = section_basis(mphi, k)
    if mphi.invariant and not dense:
        sig = basis.normalized_values("radial", mphi)
        d = np.array([math.fsum(v) for v in (np.abs(sig) ** 2 * mphi.radial_weights[:, None]).T])
        G = np.diag(d).astype(complex)
        return GramMatrix(G, mphi, k, basis, True, phi)
    _dense_allowed(mphi, basis)
    pts = mphi.points("nodes")
    w = mphi.weights

    def block(sl):
        return _chunk_gram(basis._values_at(pts[sl], mphi), w[sl])

    G = _dense_sum(block, pts.shape[0])
    G = 0.5 * (G + G.conj().T)
    return GramMatrix(G, mphi, k, basis, False, phi)


# --------------------------------------------------------------------------
# Bergman density
# --------------------------------------------------------------------------
def _orthonormal_values(gm: GramMatrix, pts: np.ndarray) -> np.ndarray:
    return gm.basis._values_at(pts, gm.model) @ gm.orthonormal_coefficients()


def bergman_values(gm: GramMatrix, kind: str | None = None, mixing: np.ndarray | None = None) -> np.ndarray:
    """``rho_k`` at the points of ``kind`` from a Gram matrix (or from mixed sections)."""
    model = gm.model
    pts = model.points(kind)
    if gm.diagonal and mixing is None:
        sig2 = np.abs(gm.basis._values_at(pts, model)) ** 2
        return sig2 @ (1.0 / np.real(np.diag(gm.matrix)))
    return np.sum(np.abs(_orthonormal_values(gm, pts)) ** 2, axis=1)


def bergman_density(model: KahlerModel, k: int, phi: ScalarField | None = None,
                    mixing: np.ndarray | None = None) -> ScalarField:
    """``rho_k = sum_j |e_j|^2 h^k e^{-k phi}`` for an orthonormal basis ``e_j``.

    ``mixing`` replaces the monomials by ``s'_b = sum_a s_a M[a, b]`` (basis-change check).
    """
    if mixing is None:
        gm = gram(model, k, phi)
        kind = gm.model.eval_kind
        vals = bergman_values(gm, kind)
        return ScalarField(gm.model, gm.model.expand(vals, kind), None, gm.model.invariant, f"rho_{k}")
    mphi = _model_with_phi(model, phi)
    basis = section_basis(mphi, k)
    M = np.asarray(mixing, dtype=complex)
    if M.shape != (basis.dimension,) * 2:
        raise DegenerateInputError(f"mixing matrix must be {basis.dimension}x{basis.dimension}")
    pts = mphi.points("nodes")
    _dense_allowed(mphi, basis)
    w = mphi.weights
    G = _dense_sum(lambda sl: _chunk_gram(basis._values_at(pts[sl], mphi) @ M, w[sl]), pts.shape[0])
    G = 0.5 * (G + G.conj().T)
    gm = GramMatrix(G, mphi, k, basis, False, phi)
    C = gm.orthonormal_coefficients()
    vals = np.sum(np.abs(basis._values_at(pts, mphi) @ M @ C) ** 2, axis=1)
    return ScalarField(mphi, vals, None, False, f"rho_{k}")


def bergman_with_laplacian(model: KahlerModel, k: int, kind: str | None = None):
    """``(rho_k, Delta rho_k)`` at the points of ``kind`` for a torus-invariant model."""
    gm = gram(model, k)
    kind = kind or gm.model.eval_kind
    pts = gm.model.points(kind)
    n = gm.model.n
    ginv = gm.model.metric(kind)["ginv"]
    rho_expr = bergman_expr(gm)

    def block(sl):
        z, zb, _ = chart_jets(gm.model.factors, pts[sl], 2)
        jet = rho_expr(z, zb)
        H = np.empty((jet.npoints, n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                H[:, i, j] = jet.derivative_value(mixed_index(n, [i], [j]))
        return np.real(jet.value), np.real(np.einsum("xji,xij->x", ginv[sl], H))

    rho, lap = map_chunks(block, pts.shape[0], 1024)
    return rho, lap


def bergman_expr(gm: GramMatrix):
    """``rho_k`` on chart jets as ``sum_a prod_j H_j^{beta_j} exp(-k Phi_chart) / G_aa`` (all ``H_j <= 1``)."""
    if not gm.diagonal:
        raise UnsupportedModelError("jet evaluation of rho_k is implemented for torus-invariant models")
    model, basis, k = gm.model, gm.basis, gm.k
    inv = 1.0 / np.real(np.diag(gm.matrix))
    hom = np.array([[b for part in h for b in part] for h in basis.homogeneous], dtype=float)

    def expr(z, zb):
        phi = as_jet(model.potential(z, zb), z[0])
        logs = []
        for f in model.factors:
            fj = z[f.offset].factor_jets
            phi = phi - f.degree * fj.shift
            for h in fj.H:
                # H_j equals 1 on the vertex chart and |u|^2 elsewhere, never 0 at nodes
                logs.append(np.log(h))
        total = None
        for a in range(basis.dimension):
            e = phi * (-float(k))
            for idx, beta in enumerate(hom[a]):
                if beta:
                    e = e + logs[idx] * beta
            term = np.exp(e) * inv[a]
            total = term if total is None else total + term
        return total

    return expr


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------
@dataclass
class OperatorMatrix:
    matrix: np.ndarray
    kind: str
    k: int
    model: KahlerModel

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def hermitian_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def skew_residual(self) -> float:
        return float(np.max(np.abs(self.matrix + self.matrix.conj().T)))

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.matrix - other.matrix, "product", self.k, self.model)

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.matrix + other.matrix, "product", self.k, self.model)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.matrix @ other.matrix, "product", self.k, self.model)


def _field_on(field: ScalarField | np.ndarray, model: KahlerModel, kind: str) -> np.ndarray:
    vals = field.values if isinstance(field, ScalarField) else np.asarray(field, dtype=complex)
    if vals.shape[0] == model.points(kind).shape[0]:
        return vals
    if kind == "radial":
        return vals.reshape(model.quadrature.n_radial, model.quadrature.n_angular)[:, 0]
    return vals


def _operator_kind(model: KahlerModel, *fields) -> str:
    inv = model.invariant and all(f.invariant for f in fields if isinstance(f, ScalarField))
    return "radial" if inv else "nodes"


def _compress(gm: GramMatrix, mult: np.ndarray, kind: str) -> np.ndarray:
    """Raw ``M[a, b] = int mult_b sigma_b conj(sigma_a)``, with ``mult`` of shape (P,) or (P, d)."""
    model, basis = gm.model, gm.basis
    pts = model.points(kind)
    if kind == "radial":
        sig2 = np.abs(basis._values_at(pts, model)) ** 2
        m = mult if mult.ndim == 2 else mult[:, None]
        w = model.radial_weights
        vals = sig2 * m * w[:, None]
        return np.diag([complex(math.fsum(v.real), math.fsum(v.imag)) for v in vals.T])
    _dense_allowed(model, basis)
    w = model.weights

    def block(sl):
        sig = basis._values_at(pts[sl], model)
        m = mult[sl] if mult.ndim == 2 else mult[sl, None]
        return np.conj(sig).T @ (sig * m * w[sl, None])

    return _dense_sum(block, pts.shape[0])


def _in_orthonormal(gm: GramMatrix, raw: np.ndarray) -> np.ndarray:
    C = gm.orthonormal_coefficients()
    return C.conj().T @ raw @ C


def toeplitz(model: KahlerModel, k: int, f: ScalarField | np.ndarray, gm: GramMatrix | None = None,
             kind: str | None = None) -> OperatorMatrix:
    """Compression of multiplication by ``f`` to ``H^0``."""
    gm = gm or gram(model, k)
    kind = kind or _operator_kind(gm.model, f)
    raw = _compress(gm, _field_on(f, gm.model, kind), kind)
    return OperatorMatrix(_in_orthonormal(gm, raw), "toeplitz", k, gm.model)


def _ks_multipliers(gm: GramMatrix, f: ScalarField, kind: str, g: ScalarField | None = None) -> np.ndarray:
    """``r[p, b] = (P_f s_b) / s_b`` at the points of ``kind``.

    In the chart of each point ``P_f s = i V^a (d_a s - k d_a Phi s) + i k f s`` with
    ``V^a = g^{jbar a} dbar_j f``, i.e. ``-X_f``.  ``g`` adds the connection term of the
    weight ``h e^{-g}``, ``X_f^a d_a g`` with ``X_f^a = -i V^a``.
    """
    model, basis = gm.model, gm.basis
    n, k = model.n, gm.k
    pts = model.points(kind)
    ginv = model.metric(kind)["ginv"]
    vert = vertex_assignment(model.factors, pts)
    f.require_expr()

    def block(sl):
        z, zb, frame = chart_jets(model.factors, pts[sl], 1)
        phi = as_jet(model.potential(z, zb), z[0])
        for fct in model.factors:
            phi = phi - fct.degree * z[fct.offset].factor_jets.shift
        fj = as_jet(f.expr(z, zb), z[0])
        d_phi = np.stack([phi.derivative_value(mixed_index(n, [a], [])) for a in range(n)], axis=1)
        df_bar = np.stack([fj.derivative_value(mixed_index(n, [], [j])) for j in range(n)], axis=1)
        V = np.einsum("xja,xj->xa", ginv[sl], df_bar)
        out = np.empty((V.shape[0], basis.dimension), dtype=complex)
        logder = V / frame.u
        vs = vert[sl]
        for pattern in {tuple(r) for r in vs}:
            sel = np.all(vs == np.array(pattern), axis=1)
            beta = _chart_exponents(basis, model, pattern)          # (d, n)
            out[sel] = logder[sel] @ beta.T
        base = -k * np.sum(V * d_phi, axis=1) + k * fj.value
        out = 1j * (out + base[:, None])
        if g is not None:
            gj = as_jet(g.require_expr()(z, zb), z[0])
            d_g = np.stack([gj.derivative_value(mixed_index(n, [a], [])) for a in range(n)], axis=1)
            out = out + (-1j * np.sum(V * d_g, axis=1))[:, None]   # X_f = -V
        return out

    return map_chunks(block, pts.shape[0], 2048)


def _chart_exponents(basis: SectionBasis, model: KahlerModel, pattern) -> np.ndarray:
    """``beta[b, a]``: exponent of chart coordinate ``u_a`` in section ``b``'s chart representative."""
    beta = np.zeros((basis.dimension, model.n))
    for fi, f in enumerate(model.factors):
        c = pattern[fi]
        for a in range(f.dim):
            j = 0 if (c > 0 and a == c - 1) else a + 1
            beta[:, f.offset + a] = [basis.homogeneous[b][fi][j] for b in range(basis.dimension)]
    return beta


def kostant_souriau(model: KahlerModel, k: int, f: ScalarField, gm: GramMatrix | None = None,
                    g: ScalarField | None = None, kind: str | None = None) -> OperatorMatrix:
    """Matrix of ``P_f = nabla_{-X_f} + i k f`` compressed to ``H^0`` (orthonormal basis)."""
    gm = gm or gram(model, k)
    kind = kind or _operator_kind(gm.model, f, g)
    r = _ks_multipliers(gm, f.on(gm.model) if f.model is not gm.model else f, kind,
                        None if g is None else (g.on(gm.model) if g.model is not gm.model else g))
    raw = _compress(gm, r, kind)
    return OperatorMatrix(_in_orthonormal(gm, raw), "kostant_souriau", k, gm.model)


def tuynman_symbol(model: KahlerModel, k: int, f: ScalarField) -> ScalarField:
    """``i (k f - Delta f)``."""
    lap = laplacian(model, f)
    return ScalarField(model, 1j * (k * f.values - lap.values), None, f.invariant, f"i(kf-Lf)")


def tuynman_residual(model: KahlerModel, k: int, f: ScalarField, gm: GramMatrix | None = None) -> float:
    """``|| kostant_souriau(f) - toeplitz(i (k f - Delta f)) ||_2``."""
    gm = gm or gram(model, k)
    kind = _operator_kind(gm.model, f)
    Q = kostant_souriau(model, k, f, gm, kind=kind)
    T = toeplitz(model, k, tuynman_symbol(gm.model, k, f), gm, kind=kind)
    return (Q - T).norm()


def moment_shift_check(model: KahlerModel, k: int, f: ScalarField, g: ScalarField) -> float:
    """``|| P_f[h e^{-g}] - P_f[h] - T(iota_{X_f} d g) ||_2`` in one orthonormal basis."""
    gm = gram(model, k)
    kind = _operator_kind(gm.model, f, g)
    A = kostant_souriau(model, k, f, gm, g=g, kind=kind)
    B = kostant_souriau(model, k, f, gm, kind=kind)
    shift = _contraction(gm.model, f, g, kind)
    T = toeplitz(model, k, shift, gm, kind=kind)
    return (A - B - T).norm()


def _contraction(model: KahlerModel, f: ScalarField, g: ScalarField, kind: str) -> np.ndarray:
    """``X_f^a d_a g`` with ``X_f^a = -i g^{jbar a} dbar_j f``, at the points of ``kind``."""
    n = model.n
    pts = model.points(kind)
    ginv = model.metric(kind)["ginv"]

    def block(sl):
        z, zb, _ = chart_jets(model.factors, pts[sl], 1)
        fj = as_jet(f.require_expr()(z, zb), z[0])
        gj = as_jet(g.require_expr()(z, zb), z[0])
        df_bar = np.stack([fj.derivative_value(mixed_index(n, [], [j])) for j in range(n)], axis=1)
        d_g = np.stack([gj.derivative_value(mixed_index(n, [a], [])) for a in range(n)], axis=1)
        X = -1j * np.einsum("xja,xj->xa", ginv[sl], df_bar)
        return np.sum(X * d_g, axis=1)

    return map_chunks(block, pts.shape[0], 4096)


# --------------------------------------------------------------------------
# traces and variations
# --------------------------------------------------------------------------
def ks_trace(model: KahlerModel, k: int, f: ScalarField) -> complex:
    """``Tr P_f^{(k)}`` on ``H^0``."""
    gm = gram(model, k)
    kind = _operator_kind(gm.model, f)
    if kind == "radial":
        r = _ks_multipliers(gm, f, kind)
        raw = _compress(gm, r, kind)
        return complex(np.sum(np.diag(raw) / np.real(np.diag(gm.matrix))))
    return kostant_souriau(model, k, f, gm, kind=kind).trace()


@dataclass
class TraceExpansionReport:
    ks: tuple
    traces: dict
    fit: object
    leading: float
    leading_reference: float
    subleading: float
    subleading_reference: float

    @property
    def leading_rel_error(self) -> float:
        return _rel(self.leading, self.leading_reference)

    @property
    def subleading_rel_error(self) -> float:
        return _rel(self.subleading, self.subleading_reference)


def _rel(a: float, b: float) -> float:
    if b == 0:
        return abs(a)
    return abs(a - b) / abs(b)


def trace_expansion_check(model: KahlerModel, f: ScalarField, ks) -> TraceExpansionReport:
    """Fit ``Tr P_f / i`` against ``k^{n+1}, k^n, k^{n-1}`` and compare with
    ``int f omega^n/n!`` and ``int f S/2 omega^n/n!``."""
    from .asymptotics import fit_expansion
    from .curvature import scalar_curvature
    ks = tuple(sorted(set(int(k) for k in ks)))
    if len(ks) < 3:
        raise FitError("trace expansion needs at least 3 distinct k values")
    n = model.n
    traces = {k: ks_trace(model, k, f) for k in ks}
    vals = {k: (traces[k] / 1j).real for k in ks}
    fit = fit_expansion(vals, [n + 1, n, n - 1])
    lead_ref = integrate(model, f).real
    sub_ref = integrate(model, f.values * scalar_curvature(model).values * 0.5).real
    return TraceExpansionReport(ks, traces, fit, float(fit.coefficients[0]), lead_ref,
                                float(fit.coefficients[1]), sub_ref)


def _integrate_kind(model: KahlerModel, vals: np.ndarray, kind: str) -> float:
    if kind == "radial":
        return integrate_radial(model, vals)
    return integrate(model, vals).real


def donaldson_variation_residual(model: KahlerModel, k: int, phi: ScalarField | None, dphi: ScalarField,
                                 h_step: float = 1e-4, sign: float = DONALDSON_SIGN) -> float:
    """``| d/dt log det Gram(phi + t dphi) - sign * int dphi (k rho - Delta rho) omega_phi^n/n! |``.

    The derivative is a central difference; ``int dphi Delta rho = int rho Delta dphi``.
    """
    base = _model_with_phi(model, phi)
    dphi = dphi.on(base)
    plus = gram(perturb(base, dphi, h_step), k).log_det()
    minus = gram(perturb(base, dphi, -h_step), k).log_det()
    lhs = (plus - minus) / (2.0 * h_step)
    gm = gram(base, k)
    kind = field_kind(base, dphi) if base.invariant else "nodes"
    rho = bergman_values(gm, kind)
    lap = _field_on(laplacian(base, dphi), base, kind).real
    dv = _field_on(dphi, base, kind).real
    rhs = sign * (k * _integrate_kind(base, dv * rho, kind) - _integrate_kind(base, rho * lap, kind))
    return abs(lhs - rhs)
