import numpy as np
import pytest
import sympy as sy
from scipy.linalg import expm

from poroplate import quasistatic as qs
from poroplate.discretization import moment, pressure_v_norm
from poroplate.errors import RegularityError, StepError
from poroplate.model import InitialData, PhysicalParams, SourceTerms
from poroplate.operators import apply_plate, build_dense_oracle, fluid_content, make_context
from poroplate.verify import make_manufactured_qs


def _zero_init(ctx):
    return InitialData("p0", p0=np.zeros(ctx.shape))


def test_zero_data_gives_zero_trajectory(ctx):
    out = qs.run(ctx, _zero_init(ctx), SourceTerms(), 0.5, 0.1)
    assert len(out.states) == 6
    assert np.all(out.pressures == 0) and np.all(out.displacements == 0)
    assert qs.weak_residual(ctx, out, SourceTerms()).max == 0.0
    assert qs.stability_report(ctx, out, SourceTerms())["ratio"] == 0.0


def test_constant_pressure_is_steady(ctx):
    init = InitialData("p0", p0=np.ones(ctx.shape))
    out = qs.run(ctx, init, SourceTerms(), 1.0, 0.25)
    for st in out.states:
        assert np.allclose(st.p, 1.0, atol=1e-12)
        assert np.max(np.abs(st.w)) <= 1e-13


def test_matches_matrix_exponential_oracle(params, rng):
    # C p' + A p = 0 has p(T) = expm(-C^-1 A T) p0; backward Euler is first order
    ctx = make_context(params, 2, 2, 9)
    o = build_dense_oracle(ctx)
    p0 = rng.standard_normal(ctx.shape)
    T = 0.4
    exact = expm(-np.linalg.solve(o.C, o.A) * T) @ p0.ravel()
    errs = []
    for tau in (0.01, 0.005, 0.0025):
        out = qs.run(ctx, InitialData("p0", p0=p0), SourceTerms(), T, tau, tol=1e-14)
        errs.append(np.linalg.norm(out.states[-1].p.ravel() - exact))
        # single step agrees with the dense solve
        p1 = np.linalg.solve(o.step_matrix(tau), o.C @ p0.ravel())
        assert np.allclose(out.states[1].p.ravel(), p1, atol=1e-12)
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(1.9 < r < 2.2 for r in ratios) and ratios[1] < ratios[0]


def test_energy_decreases_without_sources(ctx_tk, rng):
    p0 = rng.standard_normal(ctx_tk.shape)
    out = qs.run(ctx_tk, InitialData("p0", p0=p0), SourceTerms(), 2.0, 0.05)
    e = qs.energy_series(ctx_tk, out)
    assert np.all(np.diff(e) <= 1e-14 * e[0])
    assert e[-1] < e[0]


def test_step_rejects_bad_steps(ctx):
    with pytest.raises(StepError):
        qs.run(ctx, _zero_init(ctx), SourceTerms(), 1.0, 0.3)
    with pytest.raises(StepError):
        qs.run(ctx, _zero_init(ctx), SourceTerms(), 1.0, 0.0)
    st = qs.QSState(0.0, np.zeros(ctx.shape), np.zeros(ctx.basis.shape), np.zeros(ctx.shape), 0.0)
    with pytest.raises(StepError):
        qs.step(ctx, st, -0.1, np.zeros(ctx.shape))


def _forced(ctx, seed=0):
    r = np.random.default_rng(seed)
    f0 = r.standard_normal(ctx.basis.shape)
    g0 = r.standard_normal(ctx.shape)
    return SourceTerms(f=lambda t: np.cos(2 * t) * f0, g=lambda t: np.exp(-t) * g0)


def test_plate_equation_and_fluid_content_hold_each_step(ctx_tk):
    src = _forced(ctx_tk)
    d0 = np.random.default_rng(1).standard_normal(ctx_tk.shape)
    out = qs.run(ctx_tk, InitialData("d0", d0=d0), src, 0.5, 0.05, tol=1e-13)
    for st in out.states:
        f = src.f_at(st.t, ctx_tk.basis.shape)
        res = apply_plate(ctx_tk, st.w, moment(ctx_tk.grid, st.p)) - f
        assert np.max(np.abs(res)) <= 1e-10 * max(1.0, np.max(np.abs(f)))
        assert np.allclose(st.zeta, fluid_content(ctx_tk, st.p, st.w), atol=1e-12)
    # the datum is imposed on the fluid content
    assert np.allclose(out.states[0].zeta, d0, atol=1e-10)


def test_d0_and_p0_data_agree(ctx):
    src = _forced(ctx, 3)
    p0 = np.random.default_rng(4).standard_normal(ctx.shape)
    a = qs.run(ctx, InitialData("p0", p0=p0), src, 0.3, 0.05, tol=1e-13)
    d0 = a.states[0].zeta
    b = qs.run(ctx, InitialData("d0", d0=d0), src, 0.3, 0.05, tol=1e-13)
    assert np.max(np.abs(a.pressures - b.pressures)) <= 1e-10


def test_deterministic(ctx):
    src = _forced(ctx)
    a = qs.run(ctx, _zero_init(ctx), src, 0.3, 0.05)
    b = qs.run(ctx, _zero_init(ctx), src, 0.3, 0.05)
    assert np.array_equal(a.pressures, b.pressures)
    assert np.array_equal(a.displacements, b.displacements)


def test_superposition(ctx):
    s1, s2 = _forced(ctx, 5), _forced(ctx, 6)
    both = SourceTerms(f=lambda t: s1.f(t) + s2.f(t), g=lambda t: s1.g(t) + s2.g(t))
    run = lambda s: qs.run(ctx, _zero_init(ctx), s, 0.3, 0.05, tol=1e-14).pressures
    assert np.allclose(run(s1) + run(s2), run(both), atol=1e-11)


def test_translated_path_equals_direct(ctx_tk):
    src = _forced(ctx_tk, 7)
    d0 = np.random.default_rng(8).standard_normal(ctx_tk.shape)
    a = qs.run(ctx_tk, InitialData("d0", d0=d0), src, 0.4, 0.05, tol=1e-14)
    b = qs.run(ctx_tk, InitialData("d0", d0=d0), src, 0.4, 0.05, tol=1e-14, path="translated")
    assert np.max(np.abs(a.pressures - b.pressures)) <= 1e-11
    assert np.max(np.abs(a.displacements - b.displacements)) <= 1e-11


def test_translation_needs_regularity(ctx):
    src = SourceTerms(f=lambda t: np.ones(ctx.basis.shape), f_time_regularity=False)
    with pytest.raises(RegularityError):
        qs.run(ctx, _zero_init(ctx), src, 0.2, 0.1, path="translated")
    with pytest.raises(RegularityError):
        qs.translate_source(ctx, [0.0, 0.1], np.zeros((2,) + ctx.basis.shape), "second_order")
    with pytest.raises(ValueError):
        qs.run(ctx, _zero_init(ctx), SourceTerms(), 0.2, 0.1, path="sideways")


def test_translate_source_closed_form(ctx):
    lam = ctx.lam
    D, alpha = ctx.params.D, ctx.params.alpha
    zero = qs.translate_source(ctx, np.linspace(0, 1, 11), np.zeros((11,) + ctx.basis.shape))
    assert np.all(zero.g_correction == 0) and np.all(zero.w_f == 0)
    const = qs.translate_source(ctx, np.linspace(0, 1, 11), np.ones((11,) + ctx.basis.shape))
    assert np.all(const.g_correction == 0)
    assert np.allclose(const.w_f[0], 1 / (D * lam ** 2))
    # f = e^{-t} phi_11: d/dt w_f = -e^{-t} / (D lam^2)
    errs = []
    for n in (11, 21, 41):
        t = np.linspace(0, 1, n)
        f = np.zeros((n,) + ctx.basis.shape)
        f[:, 0, 0] = np.exp(-t)
        tr = qs.translate_source(ctx, t, f, "second_order")
        l11 = lam[0, 0]
        exact = alpha * np.exp(-t)[:, None] / (D * l11) * ctx.grid.nodes
        errs.append(np.max(np.abs(tr.g_correction[:, 0, 0] - exact)))
    assert errs[1] < errs[0] / 3.5 and errs[2] < errs[1] / 3.5


def test_step_energy_defect_nonpositive(ctx_tk):
    src = _forced(ctx_tk, 9)
    out = qs.run(ctx_tk, _zero_init(ctx_tk), src, 0.5, 0.05, tol=1e-13)
    for st in out.states[1:]:
        assert st.energy_defect <= 1e-12 * max(1.0, st.energy)


def test_weak_residual_decreases_with_refinement():
    case = make_manufactured_qs(PhysicalParams(D=1, alpha=1, c_p=1, h=0.5))
    res = []
    for tau, n3 in ((1 / 20, 17), (1 / 40, 33), (1 / 80, 65)):
        ctx = case.context(n3)
        out = qs.run(ctx, case.initial(ctx), case.sources(ctx), 0.5, tau, tol=1e-12)
        res.append(qs.weak_residual(ctx, out, case.sources(ctx)).max)
    assert res[0] > res[1] > res[2]
    assert res[2] < 0.05


def test_stability_ratio_scale_invariant(ctx):
    src = _forced(ctx, 10)
    d0 = np.random.default_rng(11).standard_normal(ctx.shape)
    a = qs.run(ctx, InitialData("d0", d0=d0), src, 0.5, 0.05, tol=1e-13)
    ra = qs.stability_report(ctx, a, src, d0)
    double = SourceTerms(f=lambda t: 2 * src.f(t), g=lambda t: 2 * src.g(t))
    b = qs.run(ctx, InitialData("d0", d0=2 * d0), double, 0.5, 0.05, tol=1e-13)
    rb = qs.stability_report(ctx, b, double, 2 * d0)
    assert ra["ratio"] == pytest.approx(rb["ratio"], rel=1e-9)
    assert rb["lhs"] == pytest.approx(4 * ra["lhs"], rel=1e-9)
    assert 0 < ra["ratio"] < np.inf


def test_v_norm_sq(ctx, rng):
    p = rng.standard_normal(ctx.shape)
    assert qs.v_norm_sq(ctx, p) == pytest.approx(pressure_v_norm(ctx.grid, p) ** 2)


def test_manufactured_sources_match_symbolic_derivation():
    """Derive f* and g* independently with sympy and compare pointwise."""
    x1, x2, x3, t = sy.symbols("x1 x2 x3 t", real=True)
    D, alpha, c, h, sig, fa = 1.3, 0.7, 0.9, 0.5, 1.5, 2.0
    m, n = 1, 2
    params = PhysicalParams(D=D, alpha=alpha, c_p=c, h=h)
    case = make_manufactured_qs(params, (m, n), sigma=sig, f_amp=fa)
    ss = sy.sin(m * sy.pi * x1) * sy.sin(n * sy.pi * x2)
    p = sy.exp(-sig * t) * sy.cos(sy.pi * (x3 + h) / (2 * h)) * ss
    f = fa * sy.exp(-sig * t) * 2 * ss
    lap = lambda u: sy.diff(u, x1, 2) + sy.diff(u, x2, 2)
    Kp = sy.integrate(x3 * p, (x3, -h, h))
    # hinged plate: w = W(t) 2 sin sin solves D lap^2 w + alpha lap K p = f
    W = sy.Symbol("W")
    plate_eq = sy.simplify((D * lap(lap(W * 2 * ss)) + alpha * lap(Kp) - f) / ss)
    W_sol = sy.solve(plate_eq, W)[0]
    w = W_sol * 2 * ss
    g = sy.diff(c * p - alpha * x3 * lap(w), t) - sy.diff(sy.diff(p, x3), x3)
    g_fn = sy.lambdify((x1, x2, x3, t), g, "numpy")
    W_fn = sy.lambdify(t, W_sol, "numpy")

    ctx = case.context(9, 2, 2)
    src = case.sources(ctx)
    pt = (0.3, 0.45)
    for tt in (0.0, 0.4, 1.1):
        assert case.w_hat(tt) == pytest.approx(float(W_fn(tt)), rel=1e-12)
        gm = src.g(tt)
        for j, z in enumerate(ctx.grid.nodes):
            val = ctx.basis.evaluate(gm[:, :, j], np.array([pt[0]]), np.array([pt[1]]))[0]
            assert val == pytest.approx(float(g_fn(pt[0], pt[1], z, tt)), rel=1e-10, abs=1e-12)
    assert case.profile_moment == pytest.approx(
        float(sy.integrate(x3 * sy.cos(sy.pi * (x3 + h) / (2 * h)), (x3, -h, h))), rel=1e-14)
