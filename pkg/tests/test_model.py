import numpy as np
import pytest

from poroplate.discretization import GridSpec
from poroplate.errors import BoundsViolation, EnvelopeViolation, PermeabilityEvalError
from poroplate.model import (
    InitialData, PermeabilityModel, PhysicalParams, SourceTerms, constant_permeability,
    layered_x3_permeability, make_permeability, sin_in_time_permeability, validate_params,
    validate_permeability,
)


def test_identity_params_pass():
    p = PhysicalParams(D=1, alpha=1, c_p=1, rho_p=0, h=0.5)
    rep = validate_params(p)
    assert rep.passed
    assert p.beta == 1.0


def test_beta_is_alpha_squared_over_d():
    assert PhysicalParams(D=2, alpha=1, c_p=1).beta == 0.5


def test_zero_rigidity_fails_with_message():
    rep = validate_params(PhysicalParams(D=0, alpha=1, c_p=1))
    assert not rep.passed
    assert any("D must be positive" in c.message for c in rep.failures)


def test_solver_modes_need_storage_and_density():
    p = PhysicalParams(D=1, alpha=1, c_p=0, rho_p=0)
    assert validate_params(p).passed
    rep = validate_params(p, mode="quasistatic")
    assert not rep.passed
    assert any("c_p = 0" in c.message for c in rep.failures)
    rep = validate_params(PhysicalParams(D=1, alpha=1, c_p=1, rho_p=0), mode="inertial")
    assert [c.name for c in rep.failures] == ["rho_p_positive"]


def test_replace_recomputes_beta():
    p = PhysicalParams(D=1, alpha=1, c_p=1).replace(alpha=3.0)
    assert p.beta == 9.0


GRID = GridSpec(3, 3, 9)


def test_constant_k_inside_wider_bounds():
    k = constant_permeability(1.0, k_lower=0.5, k_upper=2.0)
    rep = validate_permeability(k, GRID, T=1.0)
    assert rep.passed
    assert rep.observed["k_min"] == rep.observed["k_max"] == 1.0


def test_sin_in_time_within_bounds_and_envelope():
    # k = 1 + 0.5 sin t, |dk/dt| = 0.5 |cos t| <= 0.5
    k = sin_in_time_permeability(1.0, 0.5, 1.0, k_lower=0.4, k_upper=1.6)
    rep = validate_permeability(k, GRID, T=10.0, n_times=400)
    assert rep.passed
    # dense sampling oracle for the derivative bound
    t = np.linspace(0, 10, 20001)
    assert np.max(np.abs(np.gradient(1 + 0.5 * np.sin(t), t))) <= 0.5 + 1e-6
    assert rep.observed["max_dt_rate"] <= 0.5


def test_linear_in_time_k_violates_lower_bound():
    k = PermeabilityModel(lambda x1, x2, x3, t: np.full(np.shape(x3), t, dtype=float),
                          k_lower=0.1, k_upper=1.0)
    with pytest.raises(BoundsViolation) as exc:
        validate_permeability(k, GRID, T=1.0)
    assert exc.value.report is not None
    assert exc.value.report.observed["k_min"] == 0.0


def test_envelope_violation():
    base = sin_in_time_permeability(1.0, 0.5, 4.0)
    lying = PermeabilityModel(base.evaluate, base.k_lower, base.k_upper, "transverse",
                              dt_envelope=lambda t: np.full(np.shape(t), 0.5))
    with pytest.raises(EnvelopeViolation):
        validate_permeability(lying, GRID, T=3.0)


def test_sample_enforces_bounds_and_finiteness():
    k = PermeabilityModel(lambda x1, x2, x3, t: 2.0 + 0 * x3, k_lower=0.5, k_upper=1.5)
    with pytest.raises(BoundsViolation):
        k.sample(0.5, 0.5, np.zeros(3), 0.0)
    bad = PermeabilityModel(lambda x1, x2, x3, t: np.nan + 0 * x3, k_lower=0.5, k_upper=1.5)
    with pytest.raises(PermeabilityEvalError):
        bad.sample(0.5, 0.5, np.zeros(3), 0.0)

    def boom(*args):
        raise RuntimeError("table lookup failed")

    with pytest.raises(PermeabilityEvalError):
        PermeabilityModel(boom, 0.5, 1.5).sample(0.5, 0.5, 0.0, 0.0)


def test_layered_and_presets():
    k = layered_x3_permeability(2.0, 0.5)
    vals = k.sample(0.5, 0.5, np.array([-0.2, 0.2]), 0.0)
    assert list(vals) == [0.5, 2.0]
    assert make_permeability("constant", k0=3.0).k_lower == 3.0
    with pytest.raises(ValueError):
        make_permeability("porous-sponge")
    with pytest.raises(ValueError):
        PermeabilityModel(lambda *a: 1.0, k_lower=0.0, k_upper=1.0)
    with pytest.raises(ValueError):
        PermeabilityModel(lambda *a: 1.0, k_lower=1.0, k_upper=2.0, structure="odd")


def test_source_terms():
    s = SourceTerms()
    assert s.is_zero
    assert np.all(s.f_at(0.3, (2, 2)) == 0) and s.g_at(0.3, (2, 2, 3)).shape == (2, 2, 3)
    s = SourceTerms(f=lambda t: np.full((2, 2), np.inf))
    with pytest.raises(ValueError):
        s.f_at(0.0, (2, 2))


def test_initial_data_validation():
    d = np.zeros((2, 2, 3))
    assert InitialData("d0", d0=d).kind == "d0"
    with pytest.raises(ValueError):
        InitialData("d0", d0=d, p0=d)
    with pytest.raises(ValueError):
        InitialData("p0", d0=d)
    with pytest.raises(ValueError):
        InitialData("inertial", d0=d)
    with pytest.raises(ValueError):
        InitialData("fluid", d0=d)
