import numpy as np
import pytest

from poroplate import inertial as inr
from poroplate.errors import StepError, ValidationError
from poroplate.model import InitialData, PhysicalParams, SourceTerms, sin_in_time_permeability
from poroplate.operators import apply_A, make_context
from poroplate.verify import convergence_study, make_manufactured_inertial


@pytest.fixture
def ictx():
    return make_context(PhysicalParams(D=1.2, alpha=0.9, c_p=0.8, rho_p=0.05, h=0.5), 3, 3, 17,
                        sin_in_time_permeability())


def _random_state(ctx, rng, t=0.0):
    return inr.InertialState(t, rng.standard_normal(ctx.basis.shape) / ctx.lam,
                             rng.standard_normal(ctx.basis.shape),
                             rng.standard_normal(ctx.shape))


def test_generator_on_pure_displacement(ictx):
    P = ictx.params
    y = inr.zero_state(ictx)
    y.w[0, 0] = 1.0
    gy = inr.apply_generator(ictx, y, 0.0)
    assert np.all(gy.w == 0) and np.all(gy.p == 0)
    assert gy.v[0, 0] == pytest.approx(-P.D * (2 * np.pi ** 2) ** 2 / P.rho_p, rel=1e-14)


def test_generator_kills_constant_pressure(ictx):
    y = inr.zero_state(ictx)
    y.p[:] = 1.0
    gy = inr.apply_generator(ictx, y, 0.3)
    assert max(np.max(np.abs(a)) for a in (gy.w, gy.v, gy.p)) <= 1e-12


def test_dissipativity_identity(ictx, rng):
    for t in (0.0, 0.9, 4.0):
        y = _random_state(ictx, rng, t)
        lhs = inr.x_inner(ictx, inr.apply_generator(ictx, y, t), y)
        rhs = -inr.dissipation(ictx, y.p, t)
        assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-12)
        assert lhs <= 0


def test_zero_state_stays_zero(ictx):
    out = inr.run_inertial(ictx, inr.zero_state(ictx), None, 0.1, 0.01)
    assert all(np.all(s.w == 0) and np.all(s.p == 0) for s in out.states)


def test_decoupled_case_matches_closed_form(rng):
    D, c, rho, tau = 1.5, 0.7, 0.2, 0.01
    # alpha must be positive; at 1e-12 the coupling is far below the comparison tolerance
    ctx = make_context(PhysicalParams(D=D, alpha=1e-12, c_p=c, rho_p=rho, h=0.5), 2, 2, 9)
    y0 = _random_state(ctx, rng)
    y1 = inr.resolvent_step(ctx, y0, tau, tol=1e-14)
    # plate: harmonic oscillator backward-Euler step, 2x2 per mode
    for (i, j), lam in np.ndenumerate(ctx.lam):
        om2 = D * lam ** 2 / rho
        M = np.array([[1.0, -tau], [tau * om2, 1.0]])
        w, v = np.linalg.solve(M, [y0.w[i, j], y0.v[i, j]])
        assert y1.w[i, j] == pytest.approx(w, rel=1e-12, abs=1e-14)
        assert y1.v[i, j] == pytest.approx(v, rel=1e-12, abs=1e-14)
    # pressure: Neumann heat step (c I + tau A) p1 = c p0, dense
    n3 = ctx.grid.N3
    A = np.array([apply_A(ctx, e.reshape(1, 1, n3), 0.0).ravel() for e in np.eye(n3)]).T
    for i in range(2):
        for j in range(2):
            p = np.linalg.solve(c * np.eye(n3) + tau * A, c * y0.p[i, j])
            assert np.allclose(y1.p[i, j], p, atol=1e-12)


def test_backward_euler_contracts(ictx, rng):
    y0 = _random_state(ictx, rng)
    out = inr.run_inertial(ictx, y0, None, 2.0, 0.01)
    assert np.all(np.diff(out.energy) <= 1e-12 * out.energy[0])
    assert np.all(out.balance_defect <= 1e-10 * out.energy[0] ** 2)


def test_crank_nicolson_bounded(ictx, rng):
    y0 = _random_state(ictx, rng)
    out = inr.run_inertial(ictx, y0, None, 1.0, 0.01, scheme="crank_nicolson")
    assert np.max(out.energy) <= out.energy[0] * (1 + 1e-10)
    with pytest.raises(ValueError):
        inr.resolvent_step(ictx, y0, 0.1, scheme="leapfrog")
    with pytest.raises(StepError):
        inr.resolvent_step(ictx, y0, 0.0)


def test_resolvent_solves_implicit_system(ictx, rng):
    for s in (1e-3, 0.1, 10.0):
        r = _random_state(ictx, rng)
        y = inr.solve_implicit(ictx, r, s, 0.5, tol=1e-13)
        assert inr.resolvent_residual(ictx, y, r, s, 0.5) <= 1e-10


def test_resolvent_general_permeability(rng):
    from poroplate.model import PermeabilityModel
    k = PermeabilityModel(lambda x1, x2, x3, t: 1.0 + 0.3 * np.sin(np.pi * x1) + 0 * x3,
                          k_lower=1.0, k_upper=1.3, structure="general")
    ctx = make_context(PhysicalParams(D=1, alpha=1, c_p=1, rho_p=0.1, h=0.5), 3, 3, 9, k)
    r = _random_state(ctx, rng)
    y = inr.solve_implicit(ctx, r, 0.05, 0.0, tol=1e-12)
    assert inr.resolvent_residual(ctx, y, r, 0.05, 0.0) <= 1e-9


def test_requires_density(rng):
    ctx = make_context(PhysicalParams(D=1, alpha=1, c_p=1, rho_p=0.0), 2, 2, 5)
    with pytest.raises(ValidationError):
        inr.apply_generator(ctx, inr.zero_state(ctx), 0.0)


def test_initial_state_conventions(ictx, rng):
    P = ictx.params
    w0, w1 = rng.standard_normal((2,) + ictx.basis.shape)
    d0 = rng.standard_normal(ictx.shape)
    init = InitialData("inertial", d0=d0, w0=w0, w1=w1)
    a = inr.initial_state(ictx, init, "w1")
    b = inr.initial_state(ictx, init, "w0")
    z = ictx.grid.nodes
    assert np.allclose(P.c_p * a.p[0, 0] - P.alpha * z * (-ictx.lam[0, 0] * w1[0, 0]), d0[0, 0])
    assert np.allclose(P.c_p * b.p[0, 0] - P.alpha * z * (-ictx.lam[0, 0] * w0[0, 0]), d0[0, 0])
    with pytest.raises(ValueError):
        inr.initial_state(ictx, init, "v")
    with pytest.raises(ValueError):
        inr.initial_state(ictx, InitialData("d0", d0=d0))


def test_energy_balance_with_sources(ictx, rng):
    g0 = rng.standard_normal(ictx.shape)
    f0 = rng.standard_normal(ictx.basis.shape)
    src = SourceTerms(f=lambda t: np.sin(t) * f0, g=lambda t: np.cos(t) * g0)
    out = inr.run_inertial(ictx, _random_state(ictx, rng), src, 0.5, 0.01)
    assert len(out.states) == 51
    assert out.times[-1] == pytest.approx(0.5)


def test_boundary_condition_proxy(rng):
    P = PhysicalParams(D=1, alpha=1, c_p=1, rho_p=0.1, h=0.5)
    assert inr.boundary_condition_check(make_context(P, 2, 2, 5),
                                        inr.zero_state(make_context(P, 2, 2, 5)))["tail_norm"] == 0
    smooth, rough = [], []
    for M in (8, 16, 32):
        ctx = make_context(P, M, M, 9)
        y = inr.zero_state(ctx)
        y.w[:] = 1.0 / ctx.lam ** 3  # decays fast enough for the tail sum
        smooth.append(inr.boundary_condition_check(ctx, y)["tail_norm"])
        y.w[:] = 1.0 / ctx.lam  # too rough
        rough.append(inr.boundary_condition_check(ctx, y)["tail_norm"])
    # a convergent series: increments shrink geometrically
    assert abs(smooth[2] - smooth[1]) < 0.3 * abs(smooth[1] - smooth[0])
    assert rough[2] > 3 * rough[1] > 9 * rough[0]


def test_manufactured_convergence_in_tau():
    case = make_manufactured_inertial(PhysicalParams(D=1, alpha=1, c_p=1, rho_p=0.1, h=0.5))
    table = convergence_study(case, [(1 / 20, 129), (1 / 40, 129), (1 / 80, 129)], T=0.5)
    assert table.parameter == "tau"
    assert table.order_p >= 0.8 and table.order_w >= 0.8


def test_state_algebra(ictx, rng):
    a, b = _random_state(ictx, rng), _random_state(ictx, rng)
    c = (a + b) - b
    assert np.allclose(c.p, a.p) and np.allclose(c.w, a.w)
    assert inr.x_norm(ictx, a.scale(2.0)) == pytest.approx(2 * inr.x_norm(ictx, a))
    cp = a.copy()
    cp.w[0, 0] += 1.0
    assert cp.w[0, 0] != a.w[0, 0]
