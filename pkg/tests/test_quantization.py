import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kahlerlab.cli import field_from_spec
from kahlerlab.errors import QuadratureError
from kahlerlab.manifold import ScalarField, make_fubini_study, model_from_config
from kahlerlab.quantization import (bergman_density, donaldson_variation_residual, expected_dimension, gram,
                                    kostant_souriau, ks_trace, moment_shift_check, section_basis, toeplitz,
                                    tuynman_residual)


def beta_norm(alpha, k, n):
    # int |z^alpha|^2 (1+|z|^2)^-k omega^n/n! on CP^n with omega = (i/2pi) ddbar log(1+|z|^2)
    return math.prod(math.factorial(a) for a in alpha) * math.factorial(k - sum(alpha)) / math.factorial(k + n)


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("k", [1, 2, 5, 17, 32])
def test_dimension(n, k):
    m = make_fubini_study(n, level=8, angular=2)
    assert section_basis(m, k).dimension == math.comb(n + k, n) == expected_dimension(m, k)


def test_product_dimension(prod11):
    assert section_basis(prod11, 5).dimension == 36


@pytest.mark.parametrize("n, k", [(1, 4), (1, 32), (2, 8), (2, 20)])
def test_gram_beta_integrals(n, k):
    m = make_fubini_study(n)
    gm = gram(m, k)
    ref = np.array([beta_norm(a, k, n) for a in gm.basis.exponents])
    assert np.max(np.abs(np.real(np.diag(gm.matrix)) / ref - 1.0)) < 1e-10


def test_dense_matches_diagonal():
    m = make_fubini_study(1, level=32, angular=32)
    a, b = gram(m, 6), gram(m, 6, dense=True)
    assert not b.diagonal and b.hermitian_residual() == 0.0
    assert np.max(np.abs(a.matrix - b.matrix)) < 1e-14


def test_angular_aliasing_is_refused():
    m = make_fubini_study(1, level=16, angular=4)
    with pytest.raises(QuadratureError):
        gram(m, 8, dense=True)


@pytest.mark.parametrize("fixture", ["fs1", "pert1", "pert2"])
def test_orthonormal_coefficients(request, fixture):
    gm = gram(request.getfixturevalue(fixture), 8)
    C = gm.orthonormal_coefficients()
    assert np.max(np.abs(C.conj().T @ gm.matrix.conj() @ C - np.eye(gm.dimension))) < 1e-10


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("k", [4, 9, 16])
def test_bergman_constant_on_fubini_study(n, k):
    m = make_fubini_study(n)
    rho = bergman_density(m, k).values
    expected = math.comb(n + k, n) / m.volume()
    assert np.max(np.abs(rho - expected)) < 1e-10 * expected


@pytest.mark.parametrize("fixture", ["pert1", "pert2"])
def test_bergman_integrates_to_dimension(request, fixture):
    from kahlerlab.manifold import integrate
    m = request.getfixturevalue(fixture)
    k = 7
    rho = bergman_density(m, k)
    assert abs(integrate(m, rho).real - expected_dimension(m, k)) < 1e-10 * expected_dimension(m, k)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_bergman_basis_independent(seed):
    m = _small_pert1()
    k = 5
    rng = np.random.default_rng(seed)
    d = k + 1
    M = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) + 3 * np.eye(d)
    a = bergman_density(m, k).values
    b = bergman_density(m, k, mixing=M).values
    assert np.max(np.abs(a - b)) < 1e-9 * np.max(a)


def test_toeplitz_of_constant(fs1):
    T = toeplitz(fs1, 8, ScalarField.constant(fs1, 2.5))
    assert np.max(np.abs(T.matrix - 2.5 * np.eye(9))) < 1e-13


@pytest.mark.parametrize("spec", ["height", "basis:0,1", "xcoord"])
def test_toeplitz_hermitian(pert1, spec):
    T = toeplitz(pert1, 6, field_from_spec(pert1, spec))
    assert T.hermitian_residual() < 1e-13


@pytest.mark.parametrize("fixture, spec", [("fs1", "height"), ("pert1", "xcoord"), ("pert2", "moment1"),
                                           ("pert2", "basis:0,0,1"), ("prod11", "basis:1,1")])
def test_kostant_souriau_skew(request, fixture, spec):
    m = request.getfixturevalue(fixture)
    assert kostant_souriau(m, 6, field_from_spec(m, spec)).skew_residual() < 1e-12


@pytest.mark.parametrize("k", [4, 8, 16])
@pytest.mark.parametrize("spec", ["height", "basis:0,1", "xcoord"])
def test_tuynman(pert1, k, spec):
    assert tuynman_residual(pert1, k, field_from_spec(pert1, spec)) < 1e-8


@pytest.mark.parametrize("spec", ["moment1", "basis:0,0,1"])
def test_tuynman_cp2(pert2, spec):
    assert tuynman_residual(pert2, 6, field_from_spec(pert2, spec)) < 1e-8


@pytest.mark.parametrize("f_spec, g_spec", [("height", "basis:1"), ("xcoord", "height")])
def test_moment_shift(pert1, f_spec, g_spec):
    f, g = field_from_spec(pert1, f_spec), field_from_spec(pert1, g_spec)
    assert moment_shift_check(pert1, 6, f, g) < 1e-10


def test_trace_of_constant_symbol(fs1):
    # P_c = i k c on every section
    c = ScalarField.constant(fs1, 0.7)
    assert abs(ks_trace(fs1, 8, c) - 1j * 8 * 0.7 * 9) < 1e-12


@pytest.mark.parametrize("fixture, spec", [("fs1", "basis:1"), ("pert1", "basis:0,1"), ("fs2", "basis:0,0,1")])
def test_donaldson_variation(request, fixture, spec):
    m = request.getfixturevalue(fixture)
    dphi = field_from_spec(m, spec, "dphi")
    assert donaldson_variation_residual(m, 8, None, dphi, 1e-4) < 1e-5


def test_donaldson_constant_direction(fs1):
    # log det G shifts by -k c dim; the right side is -k c int rho
    assert donaldson_variation_residual(fs1, 8, None, ScalarField.constant(fs1, 1.3)) < 1e-9


_CACHE = {}


def _small_pert1():
    if "m" not in _CACHE:
        _CACHE["m"] = model_from_config({"manifold": "fs1", "epsilon": 0.1, "quadrature_level": 32,
                                         "angular_level": 16})
    return _CACHE["m"]
