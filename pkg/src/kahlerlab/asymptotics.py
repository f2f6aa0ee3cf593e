"""Least-squares extraction of large-k expansion coefficients.

No ``k^m log k`` columns are ever fitted; expansions are pure power series.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .charforms import z_density_values
from .curvature import curvature_batch
from .errors import DegenerateInputError, FitError
from .manifold import KahlerModel

DEFAULT_KS = tuple(range(8, 33, 2))
DEFAULT_TERMS = 6
RANK_TOL = 1e-13


@dataclass
class ExpansionFit:
    powers: tuple
    coefficients: np.ndarray      # (n_powers,) or (n_powers, P) for batched fits
    stderr: np.ndarray
    residual_norm: np.ndarray | float
    ks: tuple
    condition: float
    extras: dict = field(default_factory=dict)

    @property
    def k_range(self) -> tuple:
        return (min(self.ks), max(self.ks))

    def predict(self, k: float):
        lo, hi = self.k_range
        if not lo <= k <= hi:
            raise FitError(f"k = {k} lies outside the fitted range [{lo}, {hi}]; no extrapolation")
        basis = np.array([float(k) ** p for p in self.powers])
        return basis @ self.coefficients

    def coefficient(self, power: int):
        return self.coefficients[list(self.powers).index(power)]


def fit_expansion(values: Mapping[float, object], powers: Sequence[int]) -> ExpansionFit:
    """Fit ``values[k] ~ sum_p c_p k^p`` by column-scaled least squares.

    ``values[k]`` may be scalars or equal-length arrays (one fit per entry).
    """
    powers = tuple(int(p) for p in powers)
    if not powers:
        raise FitError("power list is empty")
    if len(set(powers)) != len(powers):
        raise FitError(f"repeated powers {powers}")
    ks = tuple(sorted(values))
    if len(ks) < len(powers) + 1:
        raise FitError(f"need at least {len(powers) + 1} k values for {len(powers)} powers, got {len(ks)}")
    kk = np.array(ks, dtype=float)
    A = np.stack([kk ** p for p in powers], axis=1)
    scale = np.linalg.norm(A, axis=0)
    As = A / scale
    Y = np.array([np.asarray(values[k], dtype=float) for k in ks])
    scalar = Y.ndim == 1
    Y2 = Y.reshape(len(ks), -1)
    U, s, Vt = np.linalg.svd(As, full_matrices=False)
    if s[-1] <= RANK_TOL * s[0]:
        raise FitError(f"rank-deficient design matrix (singular values {s})")
    cond = float(s[0] / s[-1])
    coef_s = Vt.T @ ((U.T @ Y2) / s[:, None])
    resid = Y2 - As @ coef_s
    rnorm = np.linalg.norm(resid, axis=0)
    dof = len(ks) - len(powers)
    cov_s = (Vt.T / s ** 2) @ Vt
    sigma2 = rnorm ** 2 / dof
    stderr = np.sqrt(np.outer(np.diag(cov_s), sigma2)) / scale[:, None]
    coef = coef_s / scale[:, None]
    if scalar:
        return ExpansionFit(powers, coef[:, 0], stderr[:, 0], float(rnorm[0]), ks, cond)
    return ExpansionFit(powers, coef, stderr, rnorm, ks, cond)


# --------------------------------------------------------------------------
# TYZ coefficients
# --------------------------------------------------------------------------
def _bergman_series(model: KahlerModel, ks, with_laplacian: bool = False) -> dict:
    from .quantization import bergman_values, bergman_with_laplacian, gram
    key = ("bergman_series", tuple(ks), with_laplacian)
    if key in model.cache:
        return model.cache[key]
    out = {}
    for k in ks:
        if with_laplacian:
            out[k] = bergman_with_laplacian(model, k)
        else:
            out[k] = bergman_values(gram(model, k), model.eval_kind)
    model.cache[key] = out
    return out


def tyz_fit(model: KahlerModel, ks=DEFAULT_KS, n_terms: int = DEFAULT_TERMS, with_laplacian: bool = False) -> dict:
    """Pointwise fits ``rho_k ~ sum_j k^{n-j} a_j`` at all evaluation points.

    Returns ``{"fit": ExpansionFit}`` and, with ``with_laplacian``, ``"delta_fit"`` for
    ``Delta rho_k`` (the fit is linear, so its coefficients are ``Delta a_j``).
    """
    ks = tuple(sorted(ks))
    if len(ks) < 4:
        raise FitError("TYZ fits need at least 4 k values")
    n_terms = min(n_terms, len(ks) - 1)
    powers = [model.n - j for j in range(n_terms)]
    series = _bergman_series(model, ks, with_laplacian)
    if with_laplacian:
        fit = fit_expansion({k: series[k][0] for k in ks}, powers)
        dfit = fit_expansion({k: series[k][1] for k in ks}, powers)
        return {"fit": fit, "delta_fit": dfit}
    return {"fit": fit_expansion(series, powers)}


def _point_of_node(model: KahlerModel, node: int) -> int:
    if model.eval_kind == "radial":
        return node // model.quadrature.n_angular
    return node


def tyz_coefficients(model: KahlerModel, node: int, ks=DEFAULT_KS, n_terms: int = DEFAULT_TERMS) -> tuple:
    """``(a_0, a_1, a_2)`` estimates at a quadrature node."""
    fit = tyz_fit(model, ks, n_terms)["fit"]
    p = _point_of_node(model, node)
    c = fit.coefficients[:, p]
    a = [float(c[j]) if j < c.shape[0] else float("nan") for j in range(3)]
    return tuple(a)


@dataclass
class IdentityChainReport:
    ks: tuple
    fitted: np.ndarray          # a_2 - Delta a_1 per evaluation point
    closed_form: np.ndarray     # n(n-1) Z_2 per evaluation point
    deviation: np.ndarray       # pointwise relative deviation
    max_relative_deviation: float
    note: str = "pure power fits, no log k terms"


def identity_chain_check(model: KahlerModel, ks=DEFAULT_KS, n_terms: int = DEFAULT_TERMS) -> IdentityChainReport:
    """Compare fitted ``a_2 - Delta a_1`` with ``n(n-1) Z_2`` from curvature, pointwise.

    Deviations are relative to ``|n(n-1) Z_2|`` at each point, floored at
    ``1e-3 max |n(n-1) Z_2|`` where the closed form nearly vanishes.
    """
    n = model.n
    if n < 2:
        raise DegenerateInputError("the j = 2 identity chain needs complex dimension >= 2")
    fits = tyz_fit(model, ks, n_terms, with_laplacian=True)
    a2 = fits["fit"].coefficients[2]
    da1 = fits["delta_fit"].coefficients[1]
    fitted = a2 - da1
    closed = n * (n - 1) * z_density_values(model, 2)
    scale = np.maximum(np.abs(closed), 1e-3 * np.max(np.abs(closed)))
    dev = np.abs(fitted - closed) / scale
    return IdentityChainReport(tuple(sorted(ks)), fitted, closed, dev, float(np.max(dev)))


def scalar_half(model: KahlerModel) -> np.ndarray:
    """``S/2`` at the evaluation points (the a_1 reference)."""
    return 0.5 * curvature_batch(model)["scalar"]
