"""Manufactured solutions, dense-oracle comparisons, convergence studies and
the named property suites that back the acceptance checks.

Every suite returns a list of :class:`SuiteCheck`; ``format_check`` renders
the machine-greppable line ``CHECK <suite>.<name> PASS|FAIL <value> <bound>``.
"""
from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import inertial as inr
from . import quasistatic as qs
from .discretization import (
    lift_moment, moment, plate_w_norm, pressure_v_norm, random_field,
)
from .errors import UnsupportedPermeability
from .linalg import DEFAULT_TOL
from .model import (
    InitialData, PermeabilityModel, PhysicalParams, SourceTerms, constant_permeability,
    layered_x3_permeability, sin_in_time_permeability,
)
from .operators import (
    OperatorContext, apply_A, apply_B, apply_B_via_diagram, apply_fluid_content,
    build_dense_oracle, coercivity_terms, fluid_content_bounds, inner, make_context,
    solve_fluid_content, solve_step_system,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SuiteCheck:
    suite: str
    name: str
    passed: bool
    value: float
    bound: float

    @property
    def line(self) -> str:
        return format_check(self)


def format_check(c: SuiteCheck) -> str:
    return f"CHECK {c.suite}.{c.name} {'PASS' if c.passed else 'FAIL'} {c.value:.6e} {c.bound:.6e}"


def _le(suite, name, value, bound):
    value = float(value)
    return SuiteCheck(suite, name, bool(np.isfinite(value) and value <= bound), value, float(bound))


def _rel(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return float(np.linalg.norm(a - b) / scale) if scale else 0.0


# Manufactured solutions.

def _uniform_k(permeability: PermeabilityModel) -> Callable:
    """Return ``t -> k(t)`` for a permeability that is constant in space."""
    if permeability.structure == "constant":
        k0 = float(permeability.sample(0.5, 0.5, 0.0, 0.0))
        return lambda t: k0
    if permeability.structure == "transverse":
        z = np.linspace(-1.0, 1.0, 17)
        for t in (0.0, 0.37, 1.1):
            ks = np.asarray(permeability.evaluate(0.5, 0.5, z, t), float)
            if np.ptp(ks) > 0:
                raise UnsupportedPermeability(
                    "manufactured solutions need a permeability uniform in x3")
        return lambda t: float(np.ravel(permeability.evaluate(0.5, 0.5, 0.0, t))[0])
    raise UnsupportedPermeability("manufactured solutions need a permeability uniform in space")


@dataclass(frozen=True)
class ManufacturedCase:
    """Closed-form single-mode solution and the sources it induces.

    ``p* = e^{-sigma t} cos(pi (x3+h)/(2h)) sin(m pi x1) sin(n pi x2)``; the
    cosine is the first Neumann eigenfunction of ``-d3^2`` so ``A`` acts on
    it as ``k(t) (pi/(2h))^2``. In the quasi-static case ``w*`` comes from
    the exact plate solve with load ``f* = f_amp e^{-sigma t} phi_mn``; in
    the inertial case ``w* = w_amp e^{-sigma t} phi_mn`` and ``f*`` is
    induced.
    """

    params: PhysicalParams
    mode: tuple
    sigma: float
    permeability: PermeabilityModel
    kind: str = "quasistatic"
    f_amp: float = 1.0
    w_amp: float = 0.01
    k_of_t: Callable = field(default=None, repr=False, compare=False)

    # phi_mn = 2 sin sin, so the sine product has modal coefficient 1/2
    p_amp = 0.5

    @property
    def mu(self) -> float:
        return (np.pi / (2 * self.params.h)) ** 2

    @property
    def profile_moment(self) -> float:
        """``int x3 cos(pi (x3+h)/(2h)) dx3 = -8 h^2 / pi^2``."""
        return -8 * self.params.h ** 2 / np.pi ** 2

    @property
    def lam(self) -> float:
        m, n = self.mode
        return np.pi ** 2 * (m * m + n * n)

    def profile(self, z):
        h = self.params.h
        return np.cos(np.pi * (np.asarray(z) + h) / (2 * h))

    def basis_size(self):
        return self.mode

    def _amp(self, t):
        return self.p_amp * np.exp(-self.sigma * t)

    def w_hat(self, t) -> float:
        P = self.params
        if self.kind == "inertial":
            return self.w_amp * np.exp(-self.sigma * t)
        return (self.f_amp * np.exp(-self.sigma * t)
                + P.alpha * self.lam * self._amp(t) * self.profile_moment) / (P.D * self.lam ** 2)

    def f_hat(self, t) -> float:
        P = self.params
        if self.kind == "inertial":
            w = self.w_hat(t)
            return (P.rho_p * self.sigma ** 2 * w + P.D * self.lam ** 2 * w
                    - P.alpha * self.lam * self._amp(t) * self.profile_moment)
        return self.f_amp * np.exp(-self.sigma * t)

    def _embed_plate(self, ctx, val):
        out = np.zeros(ctx.basis.shape)
        out[ctx.basis.mode_index(*self.mode)] = val
        return out

    def p_exact(self, ctx: OperatorContext, t: float) -> np.ndarray:
        out = np.zeros(ctx.shape)
        out[ctx.basis.mode_index(*self.mode)] = self._amp(t) * self.profile(ctx.grid.nodes)
        return out

    def w_exact(self, ctx: OperatorContext, t: float) -> np.ndarray:
        return self._embed_plate(ctx, self.w_hat(t))

    def v_exact(self, ctx: OperatorContext, t: float) -> np.ndarray:
        return self._embed_plate(ctx, -self.sigma * self.w_hat(t))

    def zeta_exact(self, ctx: OperatorContext, t: float) -> np.ndarray:
        P = self.params
        return P.c_p * self.p_exact(ctx, t) + P.alpha * lift_moment(
            ctx.grid, ctx.lam * self.w_exact(ctx, t))

    def sources(self, ctx: OperatorContext) -> SourceTerms:
        P = self.params
        k = self.k_of_t
        z = ctx.grid.nodes
        idx = ctx.basis.mode_index(*self.mode)
        prof = self.profile(z)
        lam = self.lam
        sig = self.sigma

        def f(t):
            return self._embed_plate(ctx, self.f_hat(t))

        def g(t):
            out = np.zeros(ctx.shape)
            dw = -sig * self.w_hat(t)
            # d/dt [c p - alpha x3 lap w] - d3(k d3 p) with lap -> -lam
            out[idx] = ((-sig * P.c_p + k(t) * self.mu) * self._amp(t) * prof
                        + P.alpha * lam * dw * z)
            return out

        return SourceTerms(f=f, g=g)

    def initial(self, ctx: OperatorContext, kind: str = "p0") -> InitialData:
        if self.kind == "inertial":
            P = self.params
            # c p(0) - alpha x3 lap w1 = d0
            d0 = P.c_p * self.p_exact(ctx, 0.0) + P.alpha * lift_moment(
                ctx.grid, ctx.lam * self.v_exact(ctx, 0.0))
            return InitialData("inertial", d0=d0, w0=self.w_exact(ctx, 0.0),
                               w1=self.v_exact(ctx, 0.0))
        if kind == "d0":
            return InitialData("d0", d0=self.zeta_exact(ctx, 0.0))
        return InitialData("p0", p0=self.p_exact(ctx, 0.0))

    def context(self, N3: int, M: Optional[int] = None, N: Optional[int] = None) -> OperatorContext:
        m, n = self.mode
        return make_context(self.params, M or m, N or n, N3, self.permeability)


def make_manufactured_qs(params: PhysicalParams, mode=(1, 1), sigma: float = 1.0,
                         permeability: Optional[PermeabilityModel] = None,
                         f_amp: float = 1.0) -> ManufacturedCase:
    permeability = permeability or constant_permeability(1.0)
    return ManufacturedCase(params, tuple(mode), float(sigma), permeability, "quasistatic",
                            f_amp=f_amp, k_of_t=_uniform_k(permeability))


def make_manufactured_inertial(params: PhysicalParams, mode=(1, 1), sigma: float = 1.0,
                               permeability: Optional[PermeabilityModel] = None,
                               w_amp: float = 0.01) -> ManufacturedCase:
    if not params.rho_p > 0:
        raise ValueError("inertial manufactured case needs rho_p > 0")
    permeability = permeability or constant_permeability(1.0)
    return ManufacturedCase(params, tuple(mode), float(sigma), permeability, "inertial",
                            w_amp=w_amp, k_of_t=_uniform_k(permeability))


# Convergence studies.

@dataclass
class ConvergenceRow:
    tau: float
    N3: int
    err_p: float
    err_w: float
    order_p: float = float("nan")
    order_w: float = float("nan")


@dataclass
class ConvergenceTable:
    rows: list
    parameter: str
    order_p: float
    order_w: float
    seconds: float = 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["tau", "N3", "err_p_l2V", "err_w_l2W", "order_p", "order_w"])
        for r in self.rows:
            wr.writerow([f"{r.tau:.10g}", r.N3, f"{r.err_p:.10e}", f"{r.err_w:.10e}",
                         f"{r.order_p:.6f}", f"{r.order_w:.6f}"])
        return buf.getvalue()


def trajectory_errors(case: ManufacturedCase, ctx: OperatorContext, states, tau: float):
    """``l2(V)`` error of ``p`` and ``l2(W)`` error of ``w`` over steps 1..n."""
    ep = ew = 0.0
    for s in states[1:]:
        ep += pressure_v_norm(ctx.grid, s.p - case.p_exact(ctx, s.t)) ** 2
        ew += plate_w_norm(ctx.basis, s.w - case.w_exact(ctx, s.t)) ** 2
    return float(np.sqrt(tau * ep)), float(np.sqrt(tau * ew))


def _slope(x, y):
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(x, y, 1)[0])


def convergence_study(case: ManufacturedCase, ladder: Sequence, T: float = 0.5,
                      tol: float = 1e-12) -> ConvergenceTable:
    """Run every rung ``(tau, N3)`` and fit observed orders.

    The refined parameter is the one that changes along the ladder: orders
    are slopes of ``log err`` against ``log tau`` or ``log dz``.
    """
    ladder = [(float(t), int(n)) for t, n in ladder]
    if len(ladder) < 3:
        raise ValueError("a convergence ladder needs at least three rungs")
    taus = {t for t, _ in ladder}
    n3s = {n for _, n in ladder}
    if len(n3s) == 1:
        parameter, hs = "tau", [t for t, _ in ladder]
    elif len(taus) == 1:
        parameter, hs = "N3", [2 * case.params.h / (n - 1) for _, n in ladder]
    else:
        parameter, hs = "tau", [t for t, _ in ladder]
    t0 = time.perf_counter()
    rows = []
    for tau, n3 in ladder:
        ctx = case.context(n3)
        src = case.sources(ctx)
        if case.kind == "inertial":
            y0 = inr.initial_state(ctx, case.initial(ctx))
            out = inr.run_inertial(ctx, y0, src, T, tau, tol=tol)
        else:
            out = qs.run(ctx, case.initial(ctx), src, T, tau, tol=tol)
        ep, ew = trajectory_errors(case, ctx, out.states, tau)
        rows.append(ConvergenceRow(tau, n3, ep, ew))
    for prev, row, hp, hr in zip(rows, rows[1:], hs, hs[1:]):
        row.order_p = np.log(prev.err_p / row.err_p) / np.log(hp / hr)
        row.order_w = np.log(prev.err_w / row.err_w) / np.log(hp / hr)
    table = ConvergenceTable(rows, parameter, _slope(hs, [r.err_p for r in rows]),
                             _slope(hs, [r.err_w for r in rows]), time.perf_counter() - t0)
    log.info("convergence in %s: order_p %.3f order_w %.3f", parameter, table.order_p, table.order_w)
    return table


# Dense oracle.

def _dense_generator(ctx: OperatorContext, t: float) -> np.ndarray:
    M, N = ctx.basis.shape
    nw = M * N
    npr = int(np.prod(ctx.shape))
    n = 2 * nw + npr
    G = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        y = inr.InertialState(t, e[:nw].reshape(M, N), e[nw:2 * nw].reshape(M, N),
                              e[2 * nw:].reshape(ctx.shape))
        d = inr.apply_generator(ctx, y, t)
        G[:, j] = np.concatenate([d.w.ravel(), d.v.ravel(), d.p.ravel()])
    return G


def oracle_equivalence(ctx: OperatorContext, t: float = 0.0, tau: float = 0.1,
                       seed: int = 0) -> dict:
    """Relative differences between matrix-free and dense evaluations."""
    rng = np.random.default_rng(seed)
    oracle = build_dense_oracle(ctx, t)
    p = rng.standard_normal(ctx.shape)
    pv = p.ravel()
    rep = {
        "A": _rel(apply_A(ctx, p, t).ravel(), oracle.A @ pv),
        "B": _rel(apply_B(ctx, p).ravel(), oracle.B @ pv),
        "C": _rel(apply_fluid_content(ctx, p).ravel(), oracle.C @ pv),
        "B_symmetry": oracle.symmetry["B"],
        "A_symmetry": oracle.symmetry["A"],
    }
    sv = np.linalg.svd(oracle.A_form, compute_uv=False)
    rep["A_kernel_dim"] = int(np.sum(sv <= 1e-10 * sv[0]))

    g = rng.standard_normal(ctx.shape)
    rhs = apply_fluid_content(ctx, p) + tau * g
    # the step evaluates A at the new time level
    step_oracle = build_dense_oracle(ctx, t + tau)
    dense = np.linalg.solve(step_oracle.step_matrix(tau), rhs.ravel())
    mf = solve_step_system(ctx, rhs, tau, t + tau, tol=1e-15, maxiter=200)
    # the PCG stopping test may sit at round-off; the error is what counts
    rep["qs_step"] = _rel(mf.x.ravel(), dense)

    ictx = ctx if ctx.params.rho_p > 0 else ctx.with_params(rho_p=1.0)
    y = inr.InertialState(t, rng.standard_normal(ctx.basis.shape),
                          rng.standard_normal(ctx.basis.shape), rng.standard_normal(ctx.shape))
    G = _dense_generator(ictx, t + tau)
    yv = np.concatenate([y.w.ravel(), y.v.ravel(), y.p.ravel()])
    dense_y = np.linalg.solve(np.eye(len(yv)) - tau * G, yv)
    mf_y = inr.resolvent_step(ictx, y, tau)
    rep["resolvent_step"] = _rel(np.concatenate([mf_y.w.ravel(), mf_y.v.ravel(), mf_y.p.ravel()]),
                                 dense_y)
    return rep


# Suites.

def suite_operator_identities(M=4, N=4, N3=33, h=0.5, seed=0, n_samples=20) -> list:
    t0 = time.perf_counter()
    ctx = make_context(PhysicalParams(D=1.0, alpha=0.8, c_p=1.0, h=h), M, N, N3)
    rng = np.random.default_rng(seed)
    adj = sym = mono = diag = 0.0
    min_bpp = np.inf
    for _ in range(n_samples):
        p = rng.standard_normal(ctx.shape)
        q = rng.standard_normal(ctx.shape)
        z = rng.standard_normal(ctx.basis.shape)
        kp, kq = moment(ctx.grid, p), lift_moment(ctx.grid, z)
        lhs, rhs = float(np.sum(kp * z)), inner(ctx, p, kq)
        adj = max(adj, abs(lhs - rhs) / (np.linalg.norm(kp) * np.linalg.norm(z)))
        bp, bq = apply_B(ctx, p), apply_B(ctx, q)
        s1, s2 = inner(ctx, bp, q), inner(ctx, p, bq)
        sym = max(sym, abs(s1 - s2) / np.sqrt(inner(ctx, bp, bp) * inner(ctx, q, q)))
        bpp = inner(ctx, bp, p)
        ref = ctx.beta * float(np.sum(kp ** 2))
        mono = max(mono, abs(bpp - ref) / ref)
        min_bpp = min(min_bpp, bpp)
        diag = max(diag, _rel(apply_B_via_diagram(ctx, p), bp))
    elapsed = time.perf_counter() - t0
    s = "operators"
    return [
        _le(s, "adjointness", adj, 1e-13),
        _le(s, "B_symmetry", sym, 1e-13),
        _le(s, "B_monotone_identity", mono, 1e-13),
        _le(s, "B_nonnegative", -min_bpp, 0.0),
        _le(s, "diagram_collapse", diag, 1e-12),
        _le(s, "runtime_s", elapsed, 1.0),
    ]


def suite_coercivity(n_fields=100, n_times=8, M=4, N=4, N3=17, T=10.0, seed=1) -> list:
    perm = sin_in_time_permeability()
    ctx = make_context(PhysicalParams(D=1.0, alpha=1.0, c_p=0.5, h=0.5), M, N, N3, perm)
    rng = np.random.default_rng(seed)
    times = rng.uniform(0, T, n_times)
    violations = 0
    worst = np.inf
    for _ in range(n_fields):
        p = rng.standard_normal(ctx.shape)
        for t in times:
            lhs, rhs = coercivity_terms(ctx, p, t)
            worst = min(worst, lhs / rhs)
            violations += lhs < rhs
    return [_le("coercivity", "violations", violations, 0),
            SuiteCheck("coercivity", "min_ratio", worst >= 1.0, float(worst), 1.0)]


def suite_dense_oracle(M=2, N=2, N3=9, seed=2) -> list:
    t0 = time.perf_counter()
    params = PhysicalParams(D=1.0, alpha=0.9, c_p=0.7, rho_p=1.0, h=0.5)
    ctx = make_context(params, M, N, N3, layered_x3_permeability())
    rep = oracle_equivalence(ctx, t=0.0, tau=0.05, seed=seed)
    elapsed = time.perf_counter() - t0
    s = "oracle"
    out = [_le(s, key, rep[key], 1e-11)
           for key in ("A", "B", "C", "qs_step", "resolvent_step")]
    out.append(_le(s, "B_symmetry", rep["B_symmetry"], 1e-13))
    out.append(SuiteCheck(s, "A_kernel_dim", rep["A_kernel_dim"] == M * N,
                          float(rep["A_kernel_dim"]), float(M * N)))
    out.append(_le(s, "runtime_s", elapsed, 5.0))
    return out


QS_TAU_LADDER = [(1 / 20, 129), (1 / 40, 129), (1 / 80, 129), (1 / 160, 129)]
QS_N3_LADDER = [(1e-4, 9), (1e-4, 17), (1e-4, 33), (1e-4, 65)]


def suite_qs_convergence(T=0.5) -> list:
    t0 = time.perf_counter()
    case = make_manufactured_qs(PhysicalParams(D=1.0, alpha=1.0, c_p=1.0, h=0.5), (1, 1), 1.0)
    tt = convergence_study(case, QS_TAU_LADDER, T)
    tn = convergence_study(case, QS_N3_LADDER, T)
    elapsed = time.perf_counter() - t0
    s = "qs_convergence"
    return [
        _le(s, "tau_order_p_dev", abs(tt.order_p - 1.0), 0.2),
        _le(s, "tau_order_w_dev", abs(tt.order_w - 1.0), 0.2),
        _le(s, "N3_order_p_dev", abs(tn.order_p - 2.0), 0.2),
        _le(s, "N3_order_w_dev", abs(tn.order_w - 2.0), 0.2),
        _le(s, "runtime_s", elapsed, 60.0),
    ]


QS_CONFIGS = [
    ("constant", PhysicalParams(D=1.0, alpha=1.0, c_p=1.0, h=0.5), constant_permeability(1.0)),
    ("weak_storage", PhysicalParams(D=0.5, alpha=2.0, c_p=0.05, h=0.5), constant_permeability(0.3)),
    ("sin_in_time", PhysicalParams(D=1.0, alpha=1.0, c_p=0.5, h=0.5),
     sin_in_time_permeability(1.0, 0.5, 3.0)),
    ("layered", PhysicalParams(D=2.0, alpha=0.5, c_p=1.0, h=0.25), layered_x3_permeability(5.0, 0.2)),
]


def suite_energy(n_steps=500, M=4, N=4, N3=17, seed=3) -> list:
    """Energy decay with zero sources over ``n_steps`` steps.

    Quasi-static: ``((c_p + B) p_n, p_n)`` nonincreasing. Inertial:
    ``||y_n||_X`` nonincreasing. A rise counts only if it exceeds
    ``1e-12`` of the initial energy (round-off).
    """
    rng = np.random.default_rng(seed)
    out = []
    tau = 0.01
    for name, params, perm in QS_CONFIGS:
        ctx = make_context(params, M, N, N3, perm)
        d0 = random_field(rng, ctx.shape)
        run = qs.run(ctx, InitialData("d0", d0=d0), SourceTerms(), n_steps * tau, tau)
        e = qs.energy_series(ctx, run)
        rise = float(np.max(np.diff(e)) / e[0])
        out.append(_le("energy", f"qs_{name}_max_rise", rise, 1e-12))
    for name, params, perm in QS_CONFIGS:
        params = params.replace(rho_p=1.0)
        ctx = make_context(params, M, N, N3, perm)
        y0 = inr.InertialState(0.0, rng.standard_normal(ctx.basis.shape) / ctx.lam,
                               rng.standard_normal(ctx.basis.shape), rng.standard_normal(ctx.shape))
        run = inr.run_inertial(ctx, y0, None, n_steps * tau, tau)
        rise = float(np.max(np.diff(run.energy)) / run.energy[0])
        out.append(_le("energy", f"inertial_{name}_max_rise", rise, 1e-12))
    return out


def suite_dissipativity(n_states=100, M=4, N=4, N3=17, seed=4) -> list:
    params = PhysicalParams(D=1.3, alpha=0.7, c_p=0.8, rho_p=1.5, h=0.5)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for perm in (constant_permeability(1.0), sin_in_time_permeability(), layered_x3_permeability()):
        ctx = make_context(params, M, N, N3, perm)
        for _ in range(n_states // 2 + 1):
            t = float(rng.uniform(0, 10))
            y = inr.InertialState(t, rng.standard_normal(ctx.basis.shape),
                                  rng.standard_normal(ctx.basis.shape),
                                  rng.standard_normal(ctx.shape))
            gy = inr.apply_generator(ctx, y, t)
            defect = abs(inr.x_inner(ctx, gy, y) + inr.dissipation(ctx, y.p, t))
            worst = max(worst, defect / inr.x_norm(ctx, y) ** 2)
    return [_le("dissipativity", "identity", worst, 1e-11)]


WEAK_LADDER = [(1 / 20, 17), (1 / 40, 33), (1 / 80, 65), (1 / 160, 129)]


def suite_weak_residual(T=0.5, seed=7) -> list:
    """Weak-form residuals on a joint (tau, N3) ladder.

    Three trajectories are checked: the solver on the manufactured case,
    the solver on smooth random data, and the exact manufactured fields
    sampled on the grid. Along the ladder the residual must decrease, the
    ratio ``R / (tau + N3^-2)`` must stay within twice its first value, and
    the fitted order in ``tau`` must be at least ``0.8``.
    """
    case = make_manufactured_qs(PhysicalParams(D=1.0, alpha=1.0, c_p=1.0, h=0.5), (1, 1), 1.0)
    rparams = PhysicalParams(D=1.0, alpha=1.2, c_p=0.5, h=0.5)
    res = {"solver": [], "random": [], "exact": []}
    for tau, n3 in WEAK_LADDER:
        ctx = case.context(n3, 2, 2)
        src = case.sources(ctx)
        run = qs.run(ctx, case.initial(ctx, "d0"), src, T, tau, tol=1e-12)
        res["solver"].append(qs.weak_residual(ctx, run, src).max)
        exact = qs.QSRun([qs.QSState(t, case.p_exact(ctx, t), case.w_exact(ctx, t),
                                     case.zeta_exact(ctx, t), 0.0) for t in run.times], tau)
        res["exact"].append(qs.weak_residual(ctx, exact, src).max)

        rctx = make_context(rparams, 3, 3, n3, sin_in_time_permeability())
        rsrc, _ = stability_data(rctx)
        # same random coefficients on every rung, times fixed smooth x3 shapes
        rng = np.random.default_rng(seed)
        # Neumann-compatible low x3 modes: no initial layer, and tau * mu < 1
        # on the ladder so the asymptotic regime is reached
        z = (rctx.grid.nodes + rparams.h) / (2 * rparams.h)
        shapes = np.stack([np.ones_like(z), np.cos(np.pi * z)])
        coef = random_field(rng, rctx.basis.shape + (2,)) / rctx.lam[..., None] * 2 * np.pi ** 2
        d0 = coef @ shapes
        rrun = qs.run(rctx, InitialData("d0", d0=d0), rsrc, T, tau, tol=1e-12)
        res["random"].append(qs.weak_residual(rctx, rrun, rsrc, d0=d0).max)
    scale = np.array([t + n ** -2.0 for t, n in WEAK_LADDER])
    taus = [t for t, _ in WEAK_LADDER]
    out = []
    for label, r in res.items():
        r = np.array(r)
        C = r / scale
        s = "weak_residual"
        out.append(_le(s, f"{label}_max_residual", r[-1], 2 * C[0] * scale[-1]))
        out.append(_le(s, f"{label}_C_growth", C.max() / C[0], 2.0))
        out.append(_le(s, f"{label}_nonmonotone_steps", int(np.sum(np.diff(r) >= 0)), 0))
        order = _slope(taus, r)
        out.append(SuiteCheck(s, f"{label}_order", order >= 0.8, order, 0.8))
    return out


STABILITY_LADDER = [(1 / 10, 9), (1 / 20, 17), (1 / 40, 33), (1 / 80, 65)]


def stability_data(ctx: OperatorContext):
    """Fixed smooth data: time-varying load and fluid source on low modes."""
    z = ctx.grid.nodes
    shape, pshape = ctx.basis.shape, ctx.shape

    def f(t):
        out = np.zeros(shape)
        out[0, 0] = np.cos(2 * t)
        out[1, 0] = 0.5 * np.sin(t)
        return out

    def g(t):
        out = np.zeros(pshape)
        out[0, 0] = (1 + z) * np.exp(-t)
        out[0, 1] = z ** 2 * np.cos(t)
        return out

    d0 = np.zeros(pshape)
    d0[0, 0] = 1.0 - z ** 2
    d0[1, 1] = z
    return SourceTerms(f=f, g=g), d0


def stability_study(ladder=STABILITY_LADDER, T=1.0, M=3, N=3,
                    params: Optional[PhysicalParams] = None, permeability=None) -> list:
    params = params or PhysicalParams(D=1.0, alpha=1.0, c_p=0.5, h=0.5)
    permeability = permeability or sin_in_time_permeability()
    reports = []
    for tau, n3 in ladder:
        ctx = make_context(params, M, N, n3, permeability)
        src, d0 = stability_data(ctx)
        run = qs.run(ctx, InitialData("d0", d0=d0), src, T, tau)
        reports.append(qs.stability_report(ctx, run, src, d0))
    return reports


def suite_stability() -> list:
    ratios = np.array([r["ratio"] for r in stability_study()])
    band = ratios.max() / ratios.min()
    return [_le("stability", "ratio_band", band, 2.0),
            SuiteCheck("stability", "ratio_finite", bool(np.all(np.isfinite(ratios))),
                       float(ratios.max()), float("inf"))]


def suite_initial_equivalence(M=3, N=3, N3=17, T=0.5, tau=0.01, tol=DEFAULT_TOL, seed=5) -> list:
    params = PhysicalParams(D=1.0, alpha=1.5, c_p=0.3, h=0.5)
    ctx = make_context(params, M, N, N3, sin_in_time_permeability())
    rng = np.random.default_rng(seed)
    d0 = random_field(rng, ctx.shape, smooth=ctx.basis)
    src, _ = stability_data(ctx)
    # the load carries fluid content of its own, which p(0) must not duplicate
    f0 = src.f_at(0.0, ctx.basis.shape)
    p0 = solve_fluid_content(ctx, d0 - qs.load_content(ctx, f0), tol=tol).x
    ra = qs.run(ctx, InitialData("d0", d0=d0), src, T, tau, tol=tol)
    rb = qs.run(ctx, InitialData("p0", p0=p0), src, T, tau, tol=tol)
    pa, pb = ra.pressures, rb.pressures
    diff = float(np.max(np.abs(pa - pb)) / np.max(np.abs(pa)))
    lo, hi = fluid_content_bounds(ctx)
    pd = solve_fluid_content(ctx, d0, tol=tol).x
    nd, npn = np.sqrt(inner(ctx, d0, d0)), np.sqrt(inner(ctx, pd, pd))
    s = "initial_data"
    return [
        _le(s, "trajectory_difference", diff, 10 * tol),
        SuiteCheck(s, "sandwich_lower", lo * nd <= npn, npn, lo * nd),
        SuiteCheck(s, "sandwich_upper", npn <= hi * nd, npn, hi * nd),
    ]


def suite_source_paths(M=3, N=3, N3=17, T=0.5, tau=0.01, tol=DEFAULT_TOL) -> list:
    params = PhysicalParams(D=1.0, alpha=1.2, c_p=0.5, h=0.5)
    ctx = make_context(params, M, N, N3, layered_x3_permeability())
    src, d0 = stability_data(ctx)
    ra = qs.run(ctx, InitialData("d0", d0=d0), src, T, tau, path="direct", tol=tol)
    rb = qs.run(ctx, InitialData("d0", d0=d0), src, T, tau, path="translated", tol=tol)
    dp = float(np.max(np.abs(ra.pressures - rb.pressures)) / np.max(np.abs(ra.pressures)))
    dw = float(np.max(np.abs(ra.displacements - rb.displacements))
               / np.max(np.abs(ra.displacements)))
    return [_le("source_paths", "pressure", dp, 10 * tol),
            _le("source_paths", "displacement", dw, 10 * tol)]


def qs_limit_study(rhos=(1e-1, 1e-2, 1e-3, 1e-4), M=2, N=2, N3=17, T=0.5, tau=1e-3) -> dict:
    """Distance between inertial and quasi-static pressures as ``rho_p -> 0``.

    The inertial run starts from the quasi-static state at rest. No rate is
    asserted; the report records whether the distances decrease.
    """
    params = PhysicalParams(D=1.0, alpha=1.0, c_p=0.5, h=0.5)
    ctx = make_context(params, M, N, N3)
    src, d0 = stability_data(ctx)
    ref = qs.run(ctx, InitialData("d0", d0=d0), src, T, tau)
    s0 = ref.states[0]
    dists = []
    for rho in rhos:
        ictx = ctx.with_params(rho_p=rho)
        y0 = inr.InertialState(0.0, s0.w.copy(), np.zeros_like(s0.w), s0.p.copy())
        run = inr.run_inertial(ictx, y0, src, T, tau)
        pi = np.stack([s.p for s in run.states])
        dists.append(float(np.sqrt(tau * np.sum((pi - ref.pressures)[1:] ** 2 * ctx.grid.weights))))
    monotone = bool(np.all(np.diff(dists) < 0))
    log.info("quasi-static limit distances %s (monotone=%s)", dists, monotone)
    return {"rho": list(rhos), "distance": dists, "monotone": monotone}


def suite_qs_limit() -> list:
    rep = qs_limit_study()
    d = rep["distance"]
    return [SuiteCheck("qs_limit", "monotone", rep["monotone"], d[-1], d[0])]


def suite_resolvent_consistency(M=3, N=3, N3=17, seed=6) -> list:
    params = PhysicalParams(D=1.0, alpha=1.0, c_p=0.5, rho_p=0.8, h=0.5)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for perm in (constant_permeability(), sin_in_time_permeability(), layered_x3_permeability()):
        ctx = make_context(params, M, N, N3, perm)
        for tau in (1e-3, 0.1, 10.0):
            y = inr.InertialState(0.0, rng.standard_normal(ctx.basis.shape),
                                  rng.standard_normal(ctx.basis.shape),
                                  rng.standard_normal(ctx.shape))
            y1 = inr.resolvent_step(ctx, y, tau)
            worst = max(worst, inr.resolvent_residual(ctx, y1, y, tau, tau))
    return [_le("resolvent", "consistency", worst, 1e-12)]


SUITES = {
    "operators": suite_operator_identities,
    "coercivity": suite_coercivity,
    "oracle": suite_dense_oracle,
    "qs_convergence": suite_qs_convergence,
    "energy": suite_energy,
    "dissipativity": suite_dissipativity,
    "weak_residual": suite_weak_residual,
    "stability": suite_stability,
    "initial_data": suite_initial_equivalence,
    "source_paths": suite_source_paths,
    "resolvent": suite_resolvent_consistency,
    "qs_limit": suite_qs_limit,
}

# Suites cheap enough for the CLI's default verify run.
QUICK_SUITES = ("operators", "coercivity", "oracle", "dissipativity", "initial_data",
                "source_paths", "resolvent")


def run_suites(names: Optional[Sequence[str]] = None) -> list:
    names = list(names) if names else list(SUITES)
    out = []
    for name in names:
        try:
            fn = SUITES[name]
        except KeyError:
            raise ValueError(f"unknown suite {name!r}; available: {sorted(SUITES)}") from None
        out.extend(fn())
    return out
