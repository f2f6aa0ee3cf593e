import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kahlerlab.charts import chart_jets
from kahlerlab.errors import NodeMismatchError, UnsupportedModelError
from kahlerlab.jets import mixed_index
from kahlerlab.manifold import (ScalarField, as_jet, expected_volume, fs_expr, integrate, make_fubini_study,
                                model_from_config, moment_coordinates, perturb, perturbation_basis,
                                product_model)


@pytest.mark.parametrize("cfg, volume", [
    ({"manifold": "fs1"}, 1.0),
    ({"manifold": "fs2"}, 0.5),
    ({"manifold": "fs1xfs1"}, 1.0),
    ({"manifold": "fs1", "scale": 2.0}, 2.0),
    ({"manifold": "fs2", "scale": 3.0}, 4.5),
])
def test_volume_is_class_degree(cfg, volume):
    m = model_from_config(cfg)
    assert abs(m.volume() - volume) < 1e-10 * volume
    assert abs(expected_volume(m.factors) - volume) < 1e-14 * volume


@pytest.mark.parametrize("cfg, volume", [({"manifold": "fs1", "epsilon": 0.1}, 1.0),
                                         ({"manifold": "fs2", "epsilon": 0.05}, 0.5)])
def test_perturbation_keeps_volume(cfg, volume):
    # omega^n/n! integrates to [omega]^n / n!
    m = model_from_config(cfg)
    assert abs(m.volume() - volume) < 1e-10


def test_cp3_volume():
    m = make_fubini_study(3)
    assert abs(m.volume() - 1.0 / 6.0) < 1e-10


def test_moment_integrals_fs2(fs2):
    # on CP^n with FS the moment map pushes forward to the uniform measure on the simplex
    x = moment_coordinates(fs2, "nodes")
    for i in range(2):
        assert abs(integrate(fs2, x[:, i]).real - 1.0 / 6.0) < 1e-12
    assert abs(integrate(fs2, x[:, 0] * x[:, 1]).real - 1.0 / 24.0) < 1e-12


@pytest.mark.parametrize("n", [0, 4, 2.5])
def test_unsupported_dimension(n):
    with pytest.raises(UnsupportedModelError):
        make_fubini_study(n)


def test_bad_config_keys():
    with pytest.raises(KeyError):
        model_from_config({"manifold": "fs1", "bogus": 1})
    with pytest.raises(UnsupportedModelError):
        model_from_config({"manifold": "torus"})


def test_bump_on_other_quadrature(fs1):
    other = make_fubini_study(1, level=16)
    bump = ScalarField.constant(other, 1.0)
    with pytest.raises(NodeMismatchError):
        perturb(fs1, bump, 0.1)
    with pytest.raises(NodeMismatchError):
        integrate(fs1, bump)


def test_jet_symmetry(pert2):
    assert pert2.check_jet_symmetry(max_points=64) < 1e-10


def test_product_volume_multiplies():
    a = make_fubini_study(1, level=24, angular=8)
    b = make_fubini_study(1, 2.0, level=24, angular=8)
    assert abs(product_model(a, b).volume() - 2.0) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(-2, 2))
def test_integrate_is_linear(coeffs, a):
    m = _fs1_small()
    basis = perturbation_basis(m, 3)
    vals = [ScalarField.from_expr(m, e, True).values for _, e in basis]
    combo = sum(c * v for c, v in zip(coeffs, vals))
    lhs = integrate(m, a * combo).real
    rhs = a * math.fsum(c * integrate(m, v).real for c, v in zip(coeffs, vals))
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs))


_CACHE = {}


def _fs1_small():
    if "m" not in _CACHE:
        _CACHE["m"] = make_fubini_study(1, level=16, angular=4)
    return _CACHE["m"]


def test_profile_sphere_matches_fubini_study(fs1):
    from kahlerlab.curvature import curvature_batch
    from kahlerlab.manifold import make_u1_sphere
    u = make_u1_sphere(lambda t: np.log(1.0 + t))
    assert abs(u.volume() - 1.0) < 1e-10
    assert np.max(np.abs(curvature_batch(u)["scalar"] - curvature_batch(fs1)["scalar"])) < 1e-6


def test_profile_sphere_rejects_non_convex():
    from kahlerlab.errors import NonPositiveMetricError
    from kahlerlab.manifold import make_u1_sphere
    with pytest.raises(NonPositiveMetricError):
        make_u1_sphere(lambda t: np.log(1.0 + t) - 0.9 * t / np.sqrt(1.0 + t))


def test_zero_perturbation_is_identity(fs1):
    from kahlerlab.manifold import height_expr
    bump = ScalarField.from_expr(fs1, height_expr(), True)
    assert perturb(fs1, bump, 0.0) is fs1


def test_product_determinant_factorizes():
    a = make_fubini_study(1, level=16, angular=4)
    b = make_fubini_study(1, 2.0, level=16, angular=4)
    p = product_model(a, b)
    da, db = a.metric("radial")["det"], b.metric("radial")["det"]
    assert p.n == 2
    assert np.allclose(p.metric("radial")["det"], np.outer(da, db).ravel(), rtol=1e-12)


@pytest.mark.parametrize("scale", [0.5, 1.0, 3.0])
def test_metric_at_origin(scale):
    m = make_fubini_study(1, scale, level=8, angular=2)
    pts = np.zeros((1, 1), dtype=complex)
    z, zb, _ = chart_jets(m.factors, pts, 2, np.zeros((1, 1), dtype=int))
    phi = as_jet(fs_expr([0], scale)(z, zb), z[0])
    assert abs(phi.derivative_value(mixed_index(1, [0], [0]))[0] - scale) < 1e-14


def test_odd_angular_mode_integrates_to_zero(fs1):
    from kahlerlab.cli import field_from_spec
    assert abs(integrate(fs1, field_from_spec(fs1, "xcoord"))) < 1e-12
