import re

import numpy as np
import pytest
from scipy.integrate import quad

from poroplate import quasistatic as qs
from poroplate import verify
from poroplate.errors import UnsupportedPermeability
from poroplate.model import (
    PhysicalParams, constant_permeability, layered_x3_permeability, sin_in_time_permeability,
)
from poroplate.operators import apply_A, make_context

LINE = re.compile(r"^CHECK [a-z_0-9]+\.[A-Za-z_0-9]+ (PASS|FAIL) -?\d\.\d{6}e[+-]\d{2,3} "
                  r"(-?\d\.\d{6}e[+-]\d{2,3}|inf)$")

P = PhysicalParams(D=1.0, alpha=1.0, c_p=1.0, h=0.5)


def test_check_line_grammar():
    c = verify.SuiteCheck("oracle", "A", True, 1.5e-16, 1e-11)
    assert c.line == "CHECK oracle.A PASS 1.500000e-16 1.000000e-11"
    assert LINE.match(verify.format_check(verify.SuiteCheck("x", "y", False, -3.0, float("inf"))))
    assert not verify._le("s", "n", float("nan"), 1.0).passed


def test_profile_moment_and_mu_against_quadrature():
    for h in (0.25, 0.5, 1.0):
        case = verify.make_manufactured_qs(P.replace(h=h))
        num = quad(lambda z: z * case.profile(z), -h, h)[0]
        assert case.profile_moment == pytest.approx(num, rel=1e-12)
        # the profile is a Neumann eigenfunction: -d3^2 prof = mu prof
        z = np.linspace(-h, h, 7)
        dz = 1e-4
        d2 = (case.profile(z + dz) - 2 * case.profile(z) + case.profile(z - dz)) / dz ** 2
        assert np.allclose(-d2, case.mu * case.profile(z), atol=1e-5 * case.mu)


def test_transverse_term_acts_as_mu_on_profile():
    case = verify.make_manufactured_qs(P)
    errs = []
    for n3 in (17, 33, 65):
        ctx = case.context(n3)
        p = case.p_exact(ctx, 0.0)
        errs.append(np.max(np.abs(apply_A(ctx, p, 0.0) - case.mu * p)) / case.mu)
    assert errs[1] < errs[0] / 3.5 and errs[2] < errs[1] / 3.5


def test_time_independent_source_at_zero_decay():
    case = verify.make_manufactured_qs(P, sigma=0.0)
    ctx = case.context(9)
    src = case.sources(ctx)
    assert np.array_equal(src.g(0.0), src.g(1.7))


def test_manufactured_requires_uniform_permeability():
    with pytest.raises(UnsupportedPermeability):
        verify.make_manufactured_qs(P, permeability=layered_x3_permeability())
    with pytest.raises(ValueError):
        verify.make_manufactured_inertial(P)
    case = verify.make_manufactured_qs(P, permeability=sin_in_time_permeability())
    assert case.k_of_t(0.0) == pytest.approx(1.0)


def test_exact_fields_satisfy_discrete_plate_equation():
    case = verify.make_manufactured_qs(P, (1, 2), f_amp=0.7)
    ctx = case.context(33, 2, 3)
    from poroplate.operators import apply_plate
    from poroplate.discretization import moment
    for t in (0.0, 0.3):
        w = case.w_exact(ctx, t)
        res = apply_plate(ctx, w, moment(ctx.grid, case.p_exact(ctx, t))) - case.sources(ctx).f(t)
        # exact up to the trapezoid error of the profile moment
        assert np.max(np.abs(res)) < 5e-3


def test_initial_data_consistency():
    case = verify.make_manufactured_qs(P)
    ctx = case.context(17)
    a = qs.run(ctx, case.initial(ctx, "p0"), case.sources(ctx), 0.1, 0.05)
    b = qs.run(ctx, case.initial(ctx, "d0"), case.sources(ctx), 0.1, 0.05)
    # d0 is the exact fluid content, p0 the exact pressure: differ by the moment error
    assert np.max(np.abs(a.pressures - b.pressures)) < 1e-2


def test_convergence_study_table():
    case = verify.make_manufactured_qs(P)
    with pytest.raises(ValueError):
        verify.convergence_study(case, [(0.1, 9), (0.05, 9)])
    table = verify.convergence_study(case, [(1e-3, 9), (1e-3, 17), (1e-3, 33)], T=0.1)
    assert table.parameter == "N3"
    assert table.order_p == pytest.approx(2.0, abs=0.25)
    lines = table.to_csv().splitlines()
    assert lines[0] == "tau,N3,err_p_l2V,err_w_l2W,order_p,order_w"
    assert len(lines) == 4 and lines[1].split(",")[4] == "nan"


def test_slope_of_exact_power_law():
    x = np.array([0.1, 0.05, 0.025])
    assert verify._slope(x, 3 * x ** 1.5) == pytest.approx(1.5, abs=1e-12)


def test_oracle_equivalence_report():
    ctx = make_context(P.replace(rho_p=0.5), 2, 2, 7, sin_in_time_permeability())
    rep = verify.oracle_equivalence(ctx, t=0.4, tau=0.2, seed=3)
    for key in ("A", "B", "C", "qs_step", "resolvent_step"):
        assert rep[key] <= 1e-11
    assert rep["A_kernel_dim"] == 4


@pytest.mark.parametrize("name", ["qs_limit", "resolvent"])
def test_non_acceptance_suites_pass(name):
    checks = verify.SUITES[name]()
    assert checks and all(c.passed for c in checks), [c.line for c in checks]
    assert all(LINE.match(c.line) for c in checks)


def test_stability_study_zero_data_and_linearity():
    reps = verify.stability_study(ladder=[(0.1, 9), (0.05, 17)])
    assert all(np.isfinite(r["ratio"]) and r["ratio"] > 0 for r in reps)


def test_run_suites_unknown_name():
    with pytest.raises(ValueError, match="unknown suite"):
        verify.run_suites(["nope"])
    checks = verify.run_suites(["dissipativity"])
    assert [c.name for c in checks] == ["identity"]


def test_constant_permeability_uniform():
    k = verify._uniform_k(constant_permeability(2.5))
    assert k(3.0) == 2.5
