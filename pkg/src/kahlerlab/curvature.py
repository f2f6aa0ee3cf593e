"""Pointwise curvature of a Kahler metric from its potential jets.

Index layout: ``g[..., i, j] = g_{i jbar}`` and ``ginv = inv(g)``, so the
inverse metric component ``g^{jbar i}`` is ``ginv[..., j, i]``.  The Riemann
tensor is stored as ``riemann[..., i, j, k, l] = R_{i jbar k lbar}``.

Batch arrays hold chart components (each point in its assigned chart, see
``charts``); scalars do not depend on the choice.  ``curvature_at`` returns
components in the affine coordinates ``z``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, NodeMismatchError, NonPositiveMetricError
from .jets import Jet, mixed_index
from .charts import chart_frame, to_z_components, to_z_vector
from .manifold import JET_ORDER, KahlerModel, ScalarField, integrate, integrate_radial
from .parallel import map_chunks


@dataclass
class CurvatureData:
    g: np.ndarray
    g_inv: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    norm_R_sq: float
    norm_ric_sq: float
    delta_scalar: float | None = None

    def check(self, tol: float = 1e-12) -> dict:
        """Residuals of the structural identities (all should be ~0)."""
        n = self.g.shape[0]
        R = self.riemann
        scale = max(1.0, float(np.max(np.abs(R))))
        ric_trace = np.einsum("lk,klij->ij", self.g_inv, R)
        return {
            "inverse": float(np.max(np.abs(self.g @ self.g_inv - np.eye(n)))),
            "sym_ik": float(np.max(np.abs(R - R.transpose(2, 1, 0, 3)))) / scale,
            "sym_jl": float(np.max(np.abs(R - R.transpose(0, 3, 2, 1)))) / scale,
            "conjugation": float(np.max(np.abs(R - np.conj(R.transpose(1, 0, 3, 2))))) / scale,
            "ricci_trace": float(np.max(np.abs(ric_trace - self.ricci))) / scale,
            "scalar_trace": abs(float(np.real(np.trace(self.g_inv @ self.ricci))) - self.scalar) / scale,
        }


# --------------------------------------------------------------------------
# jet algebra helpers
# --------------------------------------------------------------------------
def _det(m):
    n = len(m)
    total = None
    for perm in itertools.permutations(range(n)):
        sign = _perm_sign(perm)
        term = m[0][perm[0]]
        for r in range(1, n):
            term = term * m[r][perm[r]]
        term = term if sign > 0 else -term
        total = term if total is None else total + term
    return total


def _perm_sign(perm) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def _inverse(m, det):
    """Inverse of a jet matrix by cofactors; entry [i][j] = (m^{-1})_{ij}."""
    n = len(m)
    if n == 1:
        return [[1.0 / m[0][0]]]
    inv_det = 1.0 / det
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[m[r][c] for c in range(n) if c != i] for r in range(n) if r != j]
            cof = _det(minor)
            out[i][j] = cof * inv_det if (i + j) % 2 == 0 else -(cof * inv_det)
    return out


def _curvature_chunk(model: KahlerModel, pts: np.ndarray, with_delta: bool = True) -> dict:
    n = model.n
    order = JET_ORDER if with_delta else 4
    phi = model.potential_jet(pts, order)
    G = [[phi.diff(i).diff(n + j) for j in range(n)] for i in range(n)]
    g = np.empty((pts.shape[0], n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            g[:, i, j] = G[i][j].value
    g = 0.5 * (g + np.conj(np.swapaxes(g, 1, 2)))
    lo = np.linalg.eigvalsh(g)[:, 0]
    if not np.all(lo > 0):
        i = int(np.argmin(np.nan_to_num(lo, nan=-np.inf)))
        raise NonPositiveMetricError(f"metric not positive definite at point {pts[i]}",
                                     node=i, point=pts[i], eigenvalue=float(lo[i]))
    ginv = np.linalg.inv(g)

    dg = np.empty((pts.shape[0], n, n, n), dtype=complex)     # d_k g_{i jbar} -> [i, j, k]
    dbg = np.empty((pts.shape[0], n, n, n), dtype=complex)    # dbar_l g_{i jbar} -> [i, j, l]
    ddg = np.empty((pts.shape[0], n, n, n, n), dtype=complex)  # d_k dbar_l g_{i jbar} -> [i, j, k, l]
    for i in range(n):
        for j in range(n):
            holo = [i]
            for k in range(n):
                dg[:, i, j, k] = phi.derivative_value(mixed_index(n, holo + [k], [j]))
                dbg[:, i, j, k] = phi.derivative_value(mixed_index(n, holo, [j, k]))
                for l in range(n):
                    ddg[:, i, j, k, l] = phi.derivative_value(mixed_index(n, holo + [k], [j, l]))
    # R_{i jbar k lbar} = -d_k dbar_l g_{i jbar} + g^{qbar p} d_k g_{i qbar} dbar_l g_{p jbar}
    riemann = -ddg + np.einsum("xqp,xiqk,xpjl->xijkl", ginv, dg, dbg)

    logdet = np.log(_det(G))
    ricci_jets = [[-(logdet.diff(i).diff(n + j)) for j in range(n)] for i in range(n)]
    ricci = np.empty_like(g)
    for i in range(n):
        for j in range(n):
            ricci[:, i, j] = ricci_jets[i][j].value
    ricci = 0.5 * (ricci + np.conj(np.swapaxes(ricci, 1, 2)))
    scalar = np.real(np.einsum("xji,xij->x", ginv, ricci))
    norm_ric = np.real(np.einsum("xij,xjp,xpq,xqi->x", ricci, ginv, ricci, ginv))
    norm_R = np.real(np.einsum("xijkl,xpqrs,xpi,xjq,xrk,xls->x", riemann, np.conj(riemann),
                               ginv, ginv, ginv, ginv))
    out = {"g": g, "ginv": ginv, "riemann": riemann, "ricci": ricci, "scalar": scalar,
           "norm_R_sq": norm_R, "norm_ric_sq": norm_ric}
    if with_delta:
        G2 = [[G[i][j].truncate(2) for j in range(n)] for i in range(n)]
        ginv_j = _inverse(G2, _det(G2))
        S = None
        for i in range(n):
            for j in range(n):
                term = ginv_j[j][i] * ricci_jets[i][j]
                S = term if S is None else S + term
        hess = np.empty_like(g)
        for i in range(n):
            for j in range(n):
                hess[:, i, j] = S.derivative_value(mixed_index(n, [i], [j]))
        out["delta_scalar"] = np.real(np.einsum("xji,xij->x", ginv, hess))
    return out


def curvature_batch(model: KahlerModel, kind: str | None = None, chunk: int = 1024) -> dict:
    """Curvature quantities at every point of ``kind`` (cached on the model)."""
    kind = kind or model.eval_kind
    key = ("curvature", kind)
    if key not in model.cache:
        pts = model.points(kind)
        model.cache[key] = map_chunks(lambda sl: _curvature_chunk(model, pts[sl]), pts.shape[0], chunk)
    return model.cache[key]


def curvature_at(model: KahlerModel, node: int) -> CurvatureData:
    """Curvature at quadrature node ``node`` (computed at that node's coordinates)."""
    nodes = model.quadrature.size
    if not 0 <= node < nodes:
        raise NodeMismatchError(f"node {node} outside 0..{nodes - 1}")
    pt = model.quadrature.nodes[node:node + 1]
    d = _curvature_chunk(model, pt)
    frame = chart_frame(model.factors, pt)
    g = to_z_components(d["g"], frame, "hb")[0]
    ric = to_z_components(d["ricci"], frame, "hb")[0]
    R = to_z_components(d["riemann"], frame, "hbhb")[0]
    return CurvatureData(g, np.linalg.inv(g), R, ric, float(d["scalar"][0]),
                         float(d["norm_R_sq"][0]), float(d["norm_ric_sq"][0]), float(d["delta_scalar"][0]))


def scalar_field(model: KahlerModel, name: str) -> ScalarField:
    """A curvature scalar (``scalar``, ``norm_R_sq``, ``norm_ric_sq``, ``delta_scalar``) on all nodes."""
    vals = curvature_batch(model)[name]
    return ScalarField(model, model.expand(vals), None, model.invariant, name)


def scalar_curvature(model: KahlerModel) -> ScalarField:
    return scalar_field(model, "scalar")


def delta_scalar(model: KahlerModel, node: int) -> float:
    return curvature_at(model, node).delta_scalar


# --------------------------------------------------------------------------
# Laplacian and Hessian pairings
# --------------------------------------------------------------------------
def field_kind(model: KahlerModel, field: ScalarField) -> str:
    return "radial" if (model.invariant and field.invariant) else "nodes"


def complex_hessian(model: KahlerModel, field: ScalarField, kind: str | None = None) -> np.ndarray:
    """``F[..., i, j] = d_i dbar_j f`` at the points of ``kind``."""
    if field.model.quadrature is not model.quadrature:
        raise NodeMismatchError("field is sampled on a different quadrature")
    kind = kind or field_kind(model, field)
    pts = model.points(kind)
    n = model.n
    field.require_expr()

    def block(sl):
        jet = field.jet(pts[sl], 2)
        F = np.empty((jet.npoints, n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                F[:, i, j] = jet.derivative_value(mixed_index(n, [i], [j]))
        return F

    return map_chunks(block, pts.shape[0], 8192)


def laplacian(model: KahlerModel, field: ScalarField) -> ScalarField:
    """``Delta f = g^{jbar i} d_i dbar_j f``."""
    kind = field_kind(model, field)
    F = complex_hessian(model, field, kind)
    ginv = model.metric(kind)["ginv"]
    vals = np.einsum("xji,xij->x", ginv, F)
    if field.is_real:
        vals = vals.real
    return ScalarField(model, model.expand(vals, kind), None, field.invariant, f"Delta({field.name})")


class HermitianEndomorphismField:
    """Per-point endomorphism ``E[..., p, j] = l_p^j`` of the holomorphic tangent space.

    ``builder(kind)`` returns the values on the requested point set, so the field can
    be paired with both invariant and general test functions.
    """

    def __init__(self, model: KahlerModel, builder, name: str = ""):
        self.model = model
        self.builder = builder
        self.name = name
        self._cache: dict = {}

    def values(self, kind: str | None = None) -> np.ndarray:
        kind = kind or self.model.eval_kind
        if kind not in self._cache:
            self._cache[kind] = self.builder(kind)
        return self._cache[kind]

    def __mul__(self, c):
        return HermitianEndomorphismField(self.model, lambda kind: c * self.values(kind), f"{c}*{self.name}")

    __rmul__ = __mul__

    def __add__(self, other):
        return HermitianEndomorphismField(self.model, lambda kind: self.values(kind) + other.values(kind),
                                          f"{self.name}+{other.name}")

    def transformed(self, A: np.ndarray) -> np.ndarray:
        """Components after the linear change ``z = A w`` (``l -> A^{-1} l A`` in this layout)."""
        A = np.asarray(A, dtype=complex)
        return np.einsum("ab,xbc,cd->xad", A.T, self.values(), np.linalg.inv(A.T))


def identity_endomorphism(model: KahlerModel) -> HermitianEndomorphismField:
    def build(kind):
        P = model.points(kind).shape[0]
        return np.broadcast_to(np.eye(model.n, dtype=complex), (P, model.n, model.n)).copy()
    return HermitianEndomorphismField(model, build, "Id")


def ricci_endomorphism(model: KahlerModel) -> HermitianEndomorphismField:
    """``Ric_p^j = Ric_{p qbar} g^{qbar j}``."""
    def build(kind):
        c = curvature_batch(model, kind)
        return c["ricci"] @ c["ginv"]
    return HermitianEndomorphismField(model, build, "ric")


def hessian_pairing(model: KahlerModel, field: ScalarField, endo: HermitianEndomorphismField) -> complex:
    """``int d_j dbar_k f * l_p^j * g^{kbar p}  omega^n / n!``."""
    if endo.model.quadrature is not model.quadrature:
        raise NodeMismatchError("endomorphism field lives on another quadrature")
    kind = field_kind(model, field)
    F = complex_hessian(model, field, kind)
    E = endo.values(kind)
    if E.shape != F.shape:
        raise NodeMismatchError(f"shape mismatch {E.shape} vs {F.shape}")
    ginv = model.metric(kind)["ginv"]
    dens = np.einsum("xpj,xjk,xkp->x", E, F, ginv)
    if kind == "radial":
        re = integrate_radial(model, dens.real)
        im = integrate_radial(model, dens.imag)
        return complex(re, im)
    return integrate(model, dens)


# --------------------------------------------------------------------------
# Hamiltonian vector fields
# --------------------------------------------------------------------------
def _first_derivatives(model: KahlerModel, field: ScalarField, pt: np.ndarray):
    n = model.n
    jet = field.jet(pt, 1)
    fz = np.array([jet.derivative_value(mixed_index(n, [i], []))[0] for i in range(n)])
    fzb = np.array([jet.derivative_value(mixed_index(n, [], [i]))[0] for i in range(n)])
    phi = model.potential_jet(pt, 2)
    g = np.array([[phi.derivative_value(mixed_index(n, [i], [j]))[0] for j in range(n)] for i in range(n)])
    return fz, fzb, g


def _hamiltonian_w(model: KahlerModel, field: ScalarField, node: int):
    pt = model.quadrature.nodes[node:node + 1]
    fz, fzb, g = _first_derivatives(model, field, pt)
    X = -1j * (np.linalg.inv(g).T @ fzb)
    return X, fz, g, pt


def hamiltonian_field(model: KahlerModel, field: ScalarField, node: int) -> np.ndarray:
    """Real components ``(Re X^1, Im X^1, ..., Re X^n, Im X^n)`` of ``X_f`` at ``node`` in the
    affine chart, defined by ``df = iota_{X_f} omega_symp``; ``X^i = -i g^{jbar i} dbar_j f``."""
    Xu, _, _, pt = _hamiltonian_w(model, field, node)
    X = to_z_vector(chart_frame(model.factors, pt), Xu[None, :])[0]
    return np.column_stack([X.real, X.imag]).ravel()


def hamiltonian_residual(model: KahlerModel, field: ScalarField, node: int) -> float:
    """``max_Y |df(Y) - omega_symp(X_f, Y)|`` over a real basis of tangent directions."""
    X, fz, g, _ = _hamiltonian_w(model, field, node)
    assert np.all(np.linalg.eigvalsh(0.5 * (g + g.conj().T)) > 0)
    n = model.n
    worst = 0.0
    for i in range(n):
        for comp in (1.0, 1j):
            Y = np.zeros(n, dtype=complex)
            Y[i] = comp
            df = 2.0 * np.real(fz @ Y)
            omega = 1j * (X @ g @ np.conj(Y) - Y @ g @ np.conj(X))
            worst = max(worst, abs(df - omega))
    return float(worst)


def is_degenerate_request(model: KahlerModel, needed_dim: int, what: str):
    if model.n < needed_dim:
        raise DegenerateInputError(f"{what} needs complex dimension >= {needed_dim}, model has {model.n}")
