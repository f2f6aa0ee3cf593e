"""Gradient flow of Kahler potentials toward constant Z_j.

``d(phi)/dt = FLOW_SIGN * (Z_j(omega_phi) - mean)``, projected onto a fixed invariant
basis in ``L^2(omega_phi)`` with the constants removed (this is the gauge fixing of
the additive constant).  Explicit RK2 (Heun) with step doubling/halving.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .charforms import z_density_values
from .conventions import FLOW_SIGN
from .errors import DegenerateInputError, FlowError, NonPositiveMetricError, QuadratureError
from .charts import chart_jets
from .jets import Jet
from .manifold import JET_ORDER, KahlerModel, ScalarField, as_jet, integrate_radial, perturbation_basis

log = logging.getLogger(__name__)

DT_MIN = 1e-8
DT_MAX = 1e3
STALL_LIMIT = 10


@dataclass
class FlowState:
    coefficients: np.ndarray
    time: float
    energy: float
    max_deviation: float
    dt: float
    mean: float
    volume: float


@dataclass
class FlowResult:
    states: list
    model: KahlerModel
    basis: list
    converged: bool
    reason: str
    extras: dict = field(default_factory=dict)

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.states])


class _JetFamily:
    """Potential jets of ``model0`` and of each basis element, cached per point set.

    The family potential is linear in the coefficients, so jets along the flow are
    linear combinations of cached jets.
    """

    def __init__(self, model0: KahlerModel, exprs: list):
        self.model0, self.exprs = model0, exprs
        self._cache: dict = {}

    def jets(self, points: np.ndarray):
        key = (points.shape, points.tobytes())
        if key not in self._cache:
            base = self.model0.potential_jet(points, JET_ORDER)
            z, zb, _ = chart_jets(self.model0.factors, points, JET_ORDER)
            basis = [as_jet(e(z, zb), z[0]).coeffs for e in self.exprs]
            self._cache[key] = (base, basis)
        return self._cache[key]

    def combined(self, points: np.ndarray, order: int, coeffs) -> Jet:
        base, basis = self.jets(points)
        c = base.coeffs.copy()
        for ci, b in zip(coeffs, basis):
            if ci != 0.0:
                c += ci * b
        jet = Jet(base.space, c, base.order)
        return jet.truncate(order) if order < base.order else jet


class _FamilyModel(KahlerModel):
    """``model0 + sum c_i b_i`` with potential jets served from a ``_JetFamily``."""

    def __init__(self, family: _JetFamily, coeffs, terms, name: str):
        self.family = family
        self.coeffs = np.array(coeffs, dtype=float)
        m0 = family.model0
        super().__init__(m0.n, m0.quadrature, m0.base, m0.factors, True, name, terms, m0.volume_normalization)

    def potential_jet(self, points: np.ndarray, order: int = JET_ORDER) -> Jet:
        if order > JET_ORDER:
            return super().potential_jet(points, order)
        return self.family.combined(points, order, self.coeffs)


class _Problem:
    """Model family ``model0 + sum c_i b_i`` and the density ``Z_j`` on radial points."""

    def __init__(self, model0: KahlerModel, j: int, basis: list):
        if not model0.invariant:
            raise DegenerateInputError("the flow needs a torus-invariant starting model")
        if j not in (1, 2):
            raise ValueError(f"j must be 1 or 2, got {j}")
        if j == 2 and model0.n < 2:
            raise DegenerateInputError("j = 2 needs complex dimension >= 2")
        self.model0, self.j, self.basis = model0, j, basis
        pts = model0.points("radial")
        z = [pts[:, i] for i in range(model0.n)]
        zb = [np.conj(pts[:, i]) for i in range(model0.n)]
        self.values = np.array([np.real(np.broadcast_to(e(z, zb), (pts.shape[0],))) for _, e in basis])
        self._cache = {}
        self.family = _JetFamily(model0, [e for _, e in basis])

    def model(self, c: np.ndarray) -> KahlerModel:
        key = tuple(np.asarray(c, dtype=float).tolist())
        if key not in self._cache:
            terms = tuple((float(ci), e) for ci, (_, e) in zip(c, self.basis) if ci != 0.0)
            m = _FamilyModel(self.family, c, self.model0.terms + terms, f"{self.model0.name}+flow")
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[key] = m
        return self._cache[key]

    def evaluate(self, c: np.ndarray) -> dict:
        m = self.model(c)
        Z = z_density_values(m, self.j)
        w = m.radial_weights
        vol = math.fsum(w)
        mean = math.fsum(Z * w) / vol
        dev = Z - mean
        energy = math.fsum(dev ** 2 * w)
        return {"model": m, "Z": Z, "w": w, "mean": mean, "dev": dev, "energy": energy, "volume": vol}

    def velocity(self, ev: dict) -> np.ndarray:
        """Coefficients of the L^2(omega_phi) projection of ``FLOW_SIGN * dev`` onto span(basis);
        constants are projected out."""
        w = ev["w"]
        B = np.vstack([np.ones_like(self.values[0]), self.values])
        M = (B * w) @ B.T
        rhs = (B * w) @ (FLOW_SIGN * ev["dev"])
        sol = np.linalg.solve(M, rhs)
        return sol[1:]


def _state(c, t, ev, dt) -> FlowState:
    return FlowState(np.array(c, dtype=float), float(t), float(ev["energy"]), float(np.max(np.abs(ev["dev"]))),
                     float(dt), float(ev["mean"]), float(ev["volume"]))


def run_flow(model0: KahlerModel, j: int = 1, dt0: float = 0.05, t_max: float = 50.0, tol: float = 1e-4,
             basis_size: int = 6, max_steps: int = 10000, basis: list | None = None) -> FlowResult:
    """Integrate the flow until ``max |Z_j - mean| < tol`` or ``t >= t_max``.

    Steps are accepted only if the energy does not increase (beyond rounding); a rejected
    or non-positive step halves ``dt``; ``dt < 1e-8`` aborts.
    """
    basis = basis if basis is not None else perturbation_basis(model0, basis_size)
    prob = _Problem(model0, j, basis)
    c = np.zeros(len(basis))
    ev = prob.evaluate(c)
    t, dt = 0.0, float(dt0)
    states = [_state(c, t, ev, dt)]
    stall = 0
    reason = "t_max"
    converged = False
    for _ in range(max_steps):
        if states[-1].max_deviation < tol:
            converged, reason = True, "tolerance"
            break
        if t >= t_max:
            break
        h = min(dt, t_max - t)
        try:
            k1 = prob.velocity(ev)
            ev_pred = prob.evaluate(c + h * k1)
            k2 = prob.velocity(ev_pred)
            c_new = c + 0.5 * h * (k1 + k2)
            ev_new = prob.evaluate(c_new)
        except (NonPositiveMetricError, QuadratureError) as exc:
            log.debug("step rejected at t=%g dt=%g: %s", t, h, exc)
            dt = 0.5 * h
            if dt < DT_MIN:
                raise FlowError(f"metric positivity lost and dt fell below {DT_MIN:g} at t = {t:g}") from exc
            continue
        noise = 1e-13 * max(ev["energy"], 1e-300)
        if ev_new["energy"] > ev["energy"] + noise:
            dt = 0.5 * h
            if dt < DT_MIN:
                raise FlowError(f"energy does not decrease for dt >= {DT_MIN:g} at t = {t:g}")
            continue
        stall = stall + 1 if ev_new["energy"] >= ev["energy"] else 0
        if stall >= STALL_LIMIT:
            raise FlowError(f"energy failed to decrease over {STALL_LIMIT} accepted steps at t = {t:g} "
                            f"(E = {ev_new['energy']:.3e})")
        c, ev, t = c_new, ev_new, t + h
        dt = min(2.0 * h, DT_MAX)
        states.append(_state(c, t, ev, h))
    else:
        reason = "max_steps"
    if not converged and states[-1].max_deviation < tol:
        converged, reason = True, "tolerance"
    return FlowResult(states, prob.model(c), basis, converged, reason)


def energy_gradient_check(model: KahlerModel, j: int, direction, h: float = 1e-4) -> dict:
    """Chain-rule check of ``E = int (Z_j - mean)^2 omega_phi^n/n!`` along ``direction``.

    ``dE = 2 int (Z - mean) dZ + int (Z - mean)^2 Delta(direction)`` (the second term is
    the variation of ``omega_phi^n``); ``dZ`` is a central difference of the density.
    ``direction`` is an expression or a ``(label, expr)`` basis pair.
    """
    from .curvature import laplacian
    expr = direction[1] if isinstance(direction, tuple) else direction
    prob = _Problem(model, j, [("dir", expr)])
    ev0 = prob.evaluate(np.zeros(1))
    evp = prob.evaluate(np.array([h]))
    evm = prob.evaluate(np.array([-h]))
    fd = (evp["energy"] - evm["energy"]) / (2.0 * h)
    dZ = (evp["Z"] - evm["Z"]) / (2.0 * h)
    m0 = ev0["model"]
    lap = laplacian(m0, ScalarField.from_expr(m0, expr, True, "dir")).values
    lap = lap.reshape(m0.quadrature.n_radial, m0.quadrature.n_angular)[:, 0].real
    dev = ev0["dev"]
    chain = 2.0 * integrate_radial(m0, dev * dZ) + integrate_radial(m0, dev ** 2 * lap)
    abs_err = abs(fd - chain)
    scale = max(abs(fd), abs(chain))
    rel = abs_err / scale if scale > 0 else 0.0
    return {"finite_difference": fd, "chain_rule": chain, "abs_error": abs_err, "rel_error": rel}


def round_profile_error(result: FlowResult) -> float:
    """Sup over radial points of ``|u'(t) - lam/(1 + lam t)|`` for a terminal CP^1 metric,
    minimized over the dilation ``lam`` (automorphisms move round metrics)."""
    m = result.model if isinstance(result, FlowResult) else result
    if m.n != 1:
        raise DegenerateInputError("round-profile comparison is defined on CP^1")
    t = m.quadrature.radial_t[:, 0]
    up = _u_prime(m, t)

    def err(log_lam):
        lam = math.exp(log_lam)
        return float(np.max(np.abs(up - lam / (1.0 + lam * t))))

    lo, hi = -1.0, 1.0
    for _ in range(100):                        # golden-section search, err is unimodal here
        a = hi - 0.618033988749895 * (hi - lo)
        b = lo + 0.618033988749895 * (hi - lo)
        if err(a) < err(b):
            hi = b
        else:
            lo = a
    return min(err(0.5 * (lo + hi)), err(0.0))


def _u_prime(m: KahlerModel, t: np.ndarray) -> np.ndarray:
    """``u'(t)`` from the potential jet: ``d Phi / dz = u'(t) zbar`` at ``z = sqrt(t)`` in chart 0."""
    from .charts import chart_jets
    from .jets import mixed_index
    from .manifold import as_jet
    pts = np.sqrt(t).astype(complex)[:, None]
    z, zb, _ = chart_jets(m.factors, pts, 1, np.zeros((pts.shape[0], 1), dtype=int))
    phi = as_jet(m.potential(z, zb), z[0])
    return np.real(phi.derivative_value(mixed_index(1, [0], [])) / np.conj(pts[:, 0]))
