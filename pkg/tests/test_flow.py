import numpy as np
import pytest

from kahlerlab.charforms import z_density_values
from kahlerlab.errors import DegenerateInputError
from kahlerlab.flow import energy_gradient_check, round_profile_error, run_flow
from kahlerlab.manifold import model_from_config, perturbation_basis


@pytest.mark.parametrize("idx", [0, 1, 2])
def test_energy_gradient_cp1(pert1, idx):
    d = perturbation_basis(pert1, 3)[idx]
    out = energy_gradient_check(pert1, 1, d, 1e-4)
    assert out["rel_error"] < 1e-6


def test_energy_gradient_j2():
    m = model_from_config({"manifold": "fs2", "epsilon": 0.05, "quadrature_level": 32})
    out = energy_gradient_check(m, 2, perturbation_basis(m, 3)[2], 1e-4)
    assert out["rel_error"] < 1e-5


def test_round_metric_is_fixed(fs1):
    r = run_flow(fs1, 1)
    assert r.converged and len(r.states) == 1
    assert round_profile_error(r) < 1e-12


@pytest.mark.parametrize("eps", [0.05, -0.1])
def test_flow_cp1_converges(eps):
    m = model_from_config({"manifold": "fs1", "epsilon": eps, "quadrature_level": 32})
    r = run_flow(m, 1, tol=1e-5)
    assert r.converged
    e = r.energies
    assert np.all(np.diff(e) <= 1e-13 * e[:-1])
    S = z_density_values(r.model, 1)
    assert r.final.max_deviation < 1e-5
    assert np.max(S) - np.min(S) < 2e-5
    assert round_profile_error(r) < 1e-3


def test_flow_gauge_keeps_volume(pert1):
    r = run_flow(pert1, 1, t_max=0.2)
    assert all(abs(s.volume - 1.0) < 1e-10 for s in r.states)


def test_flow_rejects_bad_requests(fs1):
    with pytest.raises(DegenerateInputError):
        run_flow(fs1, 2)
    with pytest.raises(ValueError):
        run_flow(fs1, 3)


def test_non_invariant_start(fs1):
    from kahlerlab.cli import field_from_spec
    from kahlerlab.manifold import perturb
    m = perturb(fs1, field_from_spec(fs1, "xcoord"), 0.01)
    with pytest.raises(DegenerateInputError):
        run_flow(m, 1)


def test_round_profile_needs_cp1(fs2):
    with pytest.raises(DegenerateInputError):
        round_profile_error(fs2)
