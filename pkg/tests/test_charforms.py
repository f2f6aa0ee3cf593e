import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kahlerlab.charforms import (CharPoly, ell_tilde_values, ell_tilde_weak, td2_recombination_residual,
                                 todd_in_chern_characters, topological_integral, z_density_values,
                                 z_integral_check)
from kahlerlab.errors import DegenerateInputError
from kahlerlab.manifold import ScalarField, integrate, make_fubini_study, monomial_expr

# Td(x) = x / (1 - e^-x) = 1 + x/2 + x^2/12 + 0 x^3 for a line bundle
LINE_TODD = [Fraction(1), Fraction(1, 2), Fraction(1, 12), Fraction(0)]


def test_todd_low_degrees():
    assert todd_in_chern_characters(0) == CharPoly({(): 1})
    assert todd_in_chern_characters(1) == CharPoly({(1,): Fraction(1, 2)})
    assert todd_in_chern_characters(2) == CharPoly({(1, 1): Fraction(1, 8), (2,): Fraction(-1, 12)})


@pytest.mark.parametrize("j", [-1, 4, 1.5])
def test_todd_degree_range(j):
    with pytest.raises(ValueError):
        todd_in_chern_characters(j)


@pytest.mark.parametrize("j", range(4))
@given(x=st.fractions(min_value=-5, max_value=5, max_denominator=50))
def test_todd_of_line_bundle(j, x):
    ch = {m: x ** m / math.factorial(m) for m in range(1, 4)}
    assert todd_in_chern_characters(j).evaluate(ch) == LINE_TODD[j] * x ** j


@pytest.mark.parametrize("j", range(4))
def test_todd_is_homogeneous(j):
    td = todd_in_chern_characters(j)
    assert td.is_homogeneous() and td.degrees <= {j}


@pytest.mark.parametrize("fixture, j, value", [
    ("fs1", 0, 1), ("fs1", 1, 1),
    ("fs2", 0, 1), ("fs2", 1, Fraction(3, 2)), ("fs2", 2, 1),
    ("prod11", 0, 2), ("prod11", 1, 2), ("prod11", 2, 1),
])
def test_topological_integrals(request, fixture, j, value):
    m = request.getfixturevalue(fixture)
    assert topological_integral(m.factors, j) == value


@pytest.mark.parametrize("fixture", ["fs2", "pert2"])
@pytest.mark.parametrize("j", [0, 1, 2])
def test_density_integrals(request, fixture, j):
    rep = z_integral_check(request.getfixturevalue(fixture), j)
    assert rep.passed, (rep.integral, rep.topological_value)


@pytest.mark.parametrize("fixture", ["fs1", "pert1"])
def test_density_integral_cp1(request, fixture):
    rep = z_integral_check(request.getfixturevalue(fixture), 1)
    assert rep.deviation < 1e-8


@pytest.mark.parametrize("fixture", ["fs2", "pert2", "prod11"])
def test_td2_recombination(request, fixture):
    assert td2_recombination_residual(request.getfixturevalue(fixture)) < 1e-12


def test_fubini_study_densities(fs2):
    assert np.allclose(z_density_values(fs2, 1), 1.5, rtol=1e-12)
    # (12 - 72 + 108) / 24 / 2
    assert np.allclose(z_density_values(fs2, 2), 1.0, rtol=1e-10)


@pytest.mark.parametrize("e", [(1, 0), (1, 1), (0, 2)])
@pytest.mark.parametrize("j", [1, 2])
def test_weak_adjoint_term(pert2, j, e):
    f = ScalarField.from_expr(pert2, monomial_expr(e, pert2.factors[0]), True)
    weak = ell_tilde_weak(pert2, j, f)
    strong = 2 * integrate(pert2, f.values * pert2.expand(ell_tilde_values(pert2, j))).real
    assert abs(weak - strong) < 1e-8


def test_degenerate_requests(fs1):
    with pytest.raises(DegenerateInputError):
        z_density_values(fs1, 2)
    with pytest.raises(DegenerateInputError):
        td2_recombination_residual(fs1)


def test_perturbation_leaves_integrals(fs2, pert2):
    for j in (1, 2):
        a = z_integral_check(fs2, j).integral
        b = z_integral_check(pert2, j).integral
        assert abs(a - b) < 1e-8
