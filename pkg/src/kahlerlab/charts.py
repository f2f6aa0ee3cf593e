"""Standard affine atlas of products of projective spaces.

A projective factor CP^m with inhomogeneous coordinates ``z_1..z_m`` (so
``Z = (1, z_1, .., z_m)``) has charts ``U_v = {Z_v != 0}``, v = 0..m.  Each point is
assigned to the chart of its largest homogeneous coordinate, where all chart
coordinates satisfy ``|u_a| <= 1``.  Jets are taken in these coordinates;
expressions see the affine coordinates ``z`` (as jets composed from ``u``) and,
for the built-in families, the homogeneous ratios ``H_j = |Z_j / Z_v|^2`` that
keep full relative precision near every vertex.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import Jet, jet_space


@dataclass(frozen=True)
class Factor:
    """A projective factor CP^dim occupying coordinates ``offset .. offset+dim-1``."""
    offset: int
    dim: int
    degree: float

    @property
    def coords(self) -> range:
        return range(self.offset, self.offset + self.dim)


@dataclass
class FactorJets:
    """Per-factor jets: homogeneous ratios ``H[j] = |Z_j/Z_v|^2`` (j = 0..m) and
    ``shift = log |Z_v|^2``, so that ``log(1 + |z|^2) = shift + log(sum H)``."""
    factor: Factor
    H: list
    shift: Jet


@dataclass
class ChartFrame:
    vertex: np.ndarray      # (P, n_factors) chart index per factor
    u: np.ndarray           # (P, n) chart coordinates
    jac: np.ndarray         # (P, n, n) with jac[p, a, i] = d u_a / d z_i
    jac_det2: np.ndarray    # (P,) |det jac|^2


def vertex_assignment(factors, points: np.ndarray) -> np.ndarray:
    pts = np.atleast_2d(points)
    out = np.zeros((pts.shape[0], len(factors)), dtype=int)
    for f_idx, f in enumerate(factors):
        mags = np.abs(pts[:, list(f.coords)])
        cand = np.concatenate([np.ones((pts.shape[0], 1)), mags], axis=1)
        out[:, f_idx] = np.argmax(cand, axis=1)
    return out


def chart_frame(factors, points: np.ndarray, vertex: np.ndarray | None = None) -> ChartFrame:
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    P, n = pts.shape
    if vertex is None:
        vertex = vertex_assignment(factors, pts)
    vertex = np.broadcast_to(np.asarray(vertex), (P, len(factors)))
    u = pts.copy()
    jac = np.zeros((P, n, n), dtype=complex)
    det2 = np.ones(P)
    for f_idx, f in enumerate(factors):
        o, m = f.offset, f.dim
        v = vertex[:, f_idx]
        for a in range(m):
            jac[:, o + a, o + a] = 1.0
        for c in range(m):
            sel = v == c + 1
            if not np.any(sel):
                continue
            zc = pts[sel, o + c]
            for a in range(m):
                if a == c:
                    u[sel, o + a] = 1.0 / zc
                    jac[sel, o + a, o + a] = -1.0 / zc ** 2
                else:
                    u[sel, o + a] = pts[sel, o + a] / zc
                    jac[sel, o + a, o + a] = 1.0 / zc
                    jac[sel, o + a, o + c] = -pts[sel, o + a] / zc ** 2
            det2[sel] *= np.abs(zc) ** (-2.0 * (m + 1))
    return ChartFrame(np.array(vertex), u, jac, det2)


def _select(space, order, npoints, cases):
    """Jet whose column p is taken from ``cases[k][1]`` where ``cases[k][0][p]`` holds.

    Case values are jets or scalars (constant jets).
    """
    coeffs = np.zeros((space.size, npoints), dtype=complex)
    for mask, val in cases:
        if not np.any(mask):
            continue
        if isinstance(val, Jet):
            coeffs[:, mask] = val.coeffs[:, mask]
        else:
            coeffs[0, mask] = val
    return Jet(space, coeffs, order)


def chart_jets(factors, points: np.ndarray, order: int, vertex: np.ndarray | None = None):
    """Jets of ``z_i`` and ``conj(z_i)`` in chart coordinates, plus the frame.

    Each returned coordinate jet carries ``factor_jets`` for its factor.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=complex))
    P, n = pts.shape
    frame = chart_frame(factors, pts, vertex)
    space = jet_space(2 * n, order)
    U = [Jet.variable(space, a, frame.u[:, a], order) for a in range(n)]
    Ub = [Jet.variable(space, n + a, np.conj(frame.u[:, a]), order) for a in range(n)]
    z = [None] * n
    zb = [None] * n
    for f_idx, f in enumerate(factors):
        o, m = f.offset, f.dim
        v = frame.vertex[:, f_idx]
        present = set(np.unique(v).tolist())
        masks = {c: v == c for c in range(m + 1)}
        prods = [U[o + a] * Ub[o + a] for a in range(m)]
        inv = {c: (1.0 / U[o + c - 1], 1.0 / Ub[o + c - 1]) for c in present if c > 0}
        H = []
        for j in range(m + 1):
            cases = []
            for c in present:
                if j == c:
                    cases.append((masks[c], 1.0))
                elif j == 0:
                    cases.append((masks[c], prods[c - 1]))
                else:
                    cases.append((masks[c], prods[j - 1]))
            H.append(_select(space, order, P, cases))
        shift_cases = []
        for c in present:
            if c > 0:
                shift_cases.append((masks[c], -(np.log(U[o + c - 1]) + np.log(Ub[o + c - 1]))))
        shift = _select(space, order, P, shift_cases)
        fj = FactorJets(f, H, shift)
        for a in range(m):
            hz, hzb = [], []
            for c in present:
                if c == 0:
                    hz.append((masks[c], U[o + a]))
                    hzb.append((masks[c], Ub[o + a]))
                elif a == c - 1:
                    hz.append((masks[c], inv[c][0]))
                    hzb.append((masks[c], inv[c][1]))
                else:
                    hz.append((masks[c], U[o + a] * inv[c][0]))
                    hzb.append((masks[c], Ub[o + a] * inv[c][1]))
            z[o + a] = _select(space, order, P, hz)
            zb[o + a] = _select(space, order, P, hzb)
            z[o + a].factor_jets = fj
            zb[o + a].factor_jets = fj
    return z, zb, frame


def factor_jets_for(z, coords):
    """``FactorJets`` when ``z`` are chart jets and ``coords`` is exactly one factor."""
    first = z[coords[0]]
    fj = getattr(first, "factor_jets", None)
    if fj is None or tuple(fj.factor.coords) != tuple(coords):
        return None
    return fj


def to_chart_vector(frame: ChartFrame, v_z: np.ndarray) -> np.ndarray:
    return np.einsum("pai,pi->pa", frame.jac, v_z)


def to_z_vector(frame: ChartFrame, v_u: np.ndarray) -> np.ndarray:
    return np.linalg.solve(frame.jac, v_u[..., None])[..., 0]


def to_z_components(tensor: np.ndarray, frame: ChartFrame, pattern: str) -> np.ndarray:
    """Chart components of a covariant tensor -> affine-chart components.

    ``pattern`` gives index types, ``"h"`` (holomorphic) or ``"b"`` (antiholomorphic),
    e.g. ``"hb"`` for ``g_{i jbar}``.
    """
    out = np.asarray(tensor, dtype=complex)
    letters = "abcdefgh"
    for axis, kind in enumerate(pattern):
        J = frame.jac if kind == "h" else np.conj(frame.jac)
        src = "".join(letters[k] for k in range(len(pattern)))
        dst = src[:axis] + "z" + src[axis + 1:]
        out = np.einsum(f"p{src},p{src[axis]}z->p{dst}", out, J)
    return out
