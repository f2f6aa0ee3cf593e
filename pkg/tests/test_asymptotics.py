import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kahlerlab.asymptotics import fit_expansion, scalar_half, tyz_coefficients, tyz_fit
from kahlerlab.errors import FitError
from kahlerlab.manifold import make_fubini_study

KS = tuple(range(8, 33, 2))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_fit_recovers_exact_series(coeffs):
    powers = [1, 0, -1, -2]
    vals = {k: sum(c * float(k) ** p for c, p in zip(coeffs, powers)) for k in KS}
    fit = fit_expansion(vals, powers)
    assert np.allclose(fit.coefficients, coeffs, atol=1e-7 * (1 + max(map(abs, coeffs))))
    assert fit.residual_norm < 1e-9 * (1 + max(map(abs, coeffs)))


def test_fit_batched():
    a = np.array([1.0, 2.0, -3.0])
    vals = {k: a * k + 0.5 * a / k for k in KS}
    fit = fit_expansion(vals, [1, 0, -1])
    assert np.allclose(fit.coefficients[0], a) and np.allclose(fit.coefficients[2], 0.5 * a)
    assert np.allclose(fit.coefficients[1], 0.0, atol=1e-10)


@pytest.mark.parametrize("values, powers", [
    ({8: 1.0, 9: 2.0}, [1, 0]),
    ({k: 1.0 for k in KS}, []),
    ({k: 1.0 for k in KS}, [1, 1]),
])
def test_fit_rejects_bad_input(values, powers):
    with pytest.raises(FitError):
        fit_expansion(values, powers)


def test_no_extrapolation():
    fit = fit_expansion({k: 2.0 * k for k in KS}, [1, 0])
    assert abs(fit.predict(20) - 40.0) < 1e-10
    with pytest.raises(FitError):
        fit.predict(64)


@pytest.mark.parametrize("node", [0, 1000, 4095])
def test_round_sphere_coefficients(fs1, node):
    # rho_k = k + 1 exactly
    a0, a1, a2 = tyz_coefficients(fs1, node, ks=KS, n_terms=4)
    assert abs(a0 - 1) < 1e-8 and abs(a1 - 1) < 1e-6 and abs(a2) < 1e-4


def test_perturbed_sphere_a1(pert1):
    fit = tyz_fit(pert1)["fit"]
    assert np.max(np.abs(fit.coefficients[0] - 1.0)) < 1e-3
    assert np.max(np.abs(fit.coefficients[1] - scalar_half(pert1))) < 1e-2


def test_too_few_ks():
    with pytest.raises(FitError):
        tyz_fit(make_fubini_study(1, level=16, angular=2), ks=(8, 16, 24))
