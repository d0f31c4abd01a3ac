"""Backward-Euler integration of the quasi-static plate system.

The pressure solves ``d/dt[(c_p I + B) p] + A(t) p = g`` with the plate
displacement recovered from the elliptic plate equation at every step.
A plate load ``f`` is handled either directly in the plate solve
(``path="direct"``) or by translating it into corrected fluid data
(``path="translated"``); both give the same discrete trajectory.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .discretization import (
    dx3_norm_sq, lift_moment, moment, plate_w_norm, pressure_v_norm, v_dual_norm_sq,
)
from .errors import EnergyInequalityError, RegularityError, StepError
from .linalg import DEFAULT_TOL
from .model import InitialData, SourceTerms
from .operators import (
    OperatorContext, a_form, apply_A, apply_fluid_content, fluid_content, inner,
    solve_fluid_content, solve_plate, solve_step_system,
)

log = logging.getLogger(__name__)


@dataclass
class QSState:
    t: float
    p: np.ndarray
    w: np.ndarray
    zeta: np.ndarray
    energy: float
    cg_iterations: int = 0
    energy_defect: float = 0.0


@dataclass
class QSRun:
    states: list
    tau: float
    config: dict = field(default_factory=dict)
    stability: Optional[dict] = None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def pressures(self) -> np.ndarray:
        return np.stack([s.p for s in self.states])

    @property
    def displacements(self) -> np.ndarray:
        return np.stack([s.w for s in self.states])


@dataclass
class TranslatedSource:
    w_f: np.ndarray
    g_correction: np.ndarray
    d0_correction: np.ndarray


def load_content(ctx: OperatorContext, f: np.ndarray) -> np.ndarray:
    """Fluid content carried by the load alone: ``-alpha x3 lap w_f`` with ``w_f = (D E)^-1 f``."""
    return ctx.params.alpha * lift_moment(ctx.grid, f / (ctx.params.D * ctx.lam))


def translate_source(ctx: OperatorContext, times: np.ndarray, f_series: np.ndarray,
                     difference: str = "backward") -> TranslatedSource:
    """Move the plate load into the fluid equation.

    ``w_f(t) = (D E)^-1 f(t)``, the fluid source gains
    ``alpha x3 lap d/dt w_f`` and the datum gains ``alpha x3 lap w_f(0)``.
    ``difference="backward"`` uses ``(w_f[n] - w_f[n-1]) / tau``, which
    makes the translated backward-Euler run coincide with the direct one;
    ``"second_order"`` uses second-order differences instead. Entry 0 of the
    correction series is only defined for the second-order variant.
    """
    times = np.asarray(times, float)
    f_series = np.asarray(f_series, float)
    lam = ctx.lam
    w_f = f_series / (ctx.params.D * lam ** 2)
    if difference == "backward":
        if len(times) < 2:
            raise RegularityError("need at least two load samples to difference w_f")
        dw = np.zeros_like(w_f)
        dw[1:] = np.diff(w_f, axis=0) / np.diff(times)[:, None, None]
        dw[0] = dw[1]
    elif difference == "second_order":
        if len(times) < 3:
            raise RegularityError("need at least three load samples for second-order differences")
        dw = np.gradient(w_f, times, axis=0, edge_order=2)
    else:
        raise ValueError(f"unknown difference scheme {difference!r}")
    alpha = ctx.params.alpha
    g_corr = alpha * lift_moment(ctx.grid, -lam * dw)
    d0_corr = alpha * lift_moment(ctx.grid, -lam * w_f[0])
    return TranslatedSource(w_f, g_corr, d0_corr)


def _energy(ctx, p):
    return inner(ctx, apply_fluid_content(ctx, p), p)


def step(ctx: OperatorContext, state: QSState, tau: float, g_next: np.ndarray,
         f_next: Optional[np.ndarray] = None, tol: float = DEFAULT_TOL,
         maxiter: Optional[int] = None, check_energy: bool = True) -> QSState:
    """Advance one backward-Euler step.

    Solves ``(c_p I + B + tau A(t+tau)) p = zeta_n - z_f(t+tau) + tau g``
    where ``z_f`` is the load's fluid content (zero without load), then
    recovers ``w`` from the plate equation. The discrete energy inequality
    ``E_{n+1}/2 - E_n/2 + tau (A p, p) <= (s, p)`` with ``E = ((c_p+B)p, p)``
    and ``s`` the source part of the right-hand side is checked each step.
    """
    if not tau > 0:
        raise StepError(f"step size must be positive, got {tau}")
    t1 = state.t + tau
    if f_next is None:
        f_next = np.zeros(ctx.basis.shape)
    rhs = state.zeta - load_content(ctx, f_next) + tau * g_next
    sol = solve_step_system(ctx, rhs, tau, t1, tol=tol, maxiter=maxiter, x0=state.p)
    p1 = sol.x
    w1 = solve_plate(ctx, moment(ctx.grid, p1), f_next)
    e1 = _energy(ctx, p1)

    diss = tau * a_form(ctx, p1, p1, t1)
    s = rhs - apply_fluid_content(ctx, state.p)
    work = inner(ctx, s, p1)
    defect = 0.5 * e1 - 0.5 * state.energy + diss - work
    if check_energy:
        rnorm = np.sqrt(inner(ctx, rhs, rhs))
        pnorm = np.sqrt(inner(ctx, p1, p1))
        slack = 2 * max(sol.residual, tol) * rnorm * pnorm \
            + 1e-12 * (e1 + state.energy + abs(work) + diss)
        if defect > slack:
            raise EnergyInequalityError(
                f"energy inequality violated at t={t1:.6g}: defect {defect:.3e} > {slack:.3e}")
    return QSState(t1, p1, w1, fluid_content(ctx, p1, w1), e1, sol.iterations, defect)


def _time_grid(T, tau):
    if not tau > 0:
        raise StepError(f"step size must be positive, got {tau}")
    n = int(round(T / tau))
    if n < 1 or abs(n * tau - T) > 1e-9 * T:
        raise StepError(f"T={T} is not an integer multiple of tau={tau}")
    return np.arange(n + 1) * tau


def run(ctx: OperatorContext, init: InitialData, sources: SourceTerms, T: float, tau: float,
        path: str = "direct", tol: float = DEFAULT_TOL, maxiter: Optional[int] = None,
        on_step: Optional[Callable] = None) -> QSRun:
    """Integrate on ``[0, T]`` with uniform steps.

    ``init.kind == "d0"`` imposes the fluid content directly; ``"p0"``
    imposes the pressure, which is equivalent since ``c_p I + B`` is an
    isomorphism.
    """
    if init.kind not in ("d0", "p0"):
        raise ValueError("quasi-static runs take d0 or p0 initial data")
    if path not in ("direct", "translated"):
        raise ValueError(f"unknown source path {path!r}")
    times = _time_grid(T, tau)
    shape, pshape = ctx.basis.shape, ctx.shape
    f_series = np.stack([sources.f_at(t, shape) for t in times])
    zero_f = np.zeros(shape)

    if path == "translated":
        if sources.f is not None and not sources.f_time_regularity:
            raise RegularityError("translation needs a load with a time derivative")
        tr = translate_source(ctx, times, f_series, "backward")
        w_f, g_corr = tr.w_f, tr.g_correction
        step_f = [zero_f] * len(times)
    else:
        w_f = np.zeros((len(times),) + shape)
        g_corr = np.zeros((len(times),) + pshape)
        step_f = list(f_series)

    # Internal state of the stepped system; equals the reported state on the direct path.
    f0 = step_f[0]
    if init.kind == "d0":
        d0 = np.asarray(init.d0, float)
        if path == "translated":
            d0 = d0 + tr.d0_correction
        sol = solve_fluid_content(ctx, d0 - load_content(ctx, f0), tol=tol, maxiter=maxiter)
        p0, zeta0, its = sol.x, d0, sol.iterations
    else:
        p0 = np.asarray(init.p0, float)
        zeta0, its = None, 0
    w0 = solve_plate(ctx, moment(ctx.grid, p0), f0)
    if zeta0 is None:
        zeta0 = fluid_content(ctx, p0, w0)
    inner_state = QSState(0.0, p0, w0, zeta0, _energy(ctx, p0), its)

    def report(st, n):
        if path == "direct":
            return st
        w = st.w + w_f[n]
        return QSState(st.t, st.p, w, fluid_content(ctx, st.p, w), st.energy,
                       st.cg_iterations, st.energy_defect)

    states = [report(inner_state, 0)]
    if on_step:
        on_step(states[-1])
    for n in range(1, len(times)):
        g = sources.g_at(times[n], pshape) + g_corr[n]
        inner_state = step(ctx, inner_state, tau, g, step_f[n], tol=tol, maxiter=maxiter)
        inner_state.t = float(times[n])
        states.append(report(inner_state, n))
        if on_step:
            on_step(states[-1])
    log.debug("quasi-static run: %d steps, %d CG iterations", len(times) - 1,
              sum(s.cg_iterations for s in states))
    return QSRun(states, tau, {"T": T, "tau": tau, "path": path, "tol": tol})


# Weak-form residuals.

@dataclass(frozen=True)
class PlateTest:
    mode: tuple
    theta: Callable


@dataclass(frozen=True)
class PressureTest:
    mode: tuple
    profile: np.ndarray
    theta: Callable
    dtheta: Callable
    label: str = ""


def default_test_bank(ctx: OperatorContext, T: float):
    """Modal plate tests and separable pressure tests vanishing at ``T``."""
    h = ctx.params.h
    z = ctx.grid.nodes
    modes = [(m, n) for m in (1, 2) for n in (1, 2) if m <= ctx.basis.M and n <= ctx.basis.N]
    plate = [PlateTest(md, th) for md in modes
             for th in (lambda t: 1.0 + 0 * t, lambda t, T=T: t / T)]
    profiles = {
        "one": np.ones_like(z),
        "x3": z / h,
        "cos": np.cos(np.pi * (z + h) / (2 * h)),
        "x3sq": (z / h) ** 2,
    }
    thetas = [
        (lambda t, T=T: (T - t) / T, lambda t, T=T: -1.0 / T + 0 * t),
        (lambda t, T=T: np.cos(np.pi * t / (2 * T)),
         lambda t, T=T: -np.pi / (2 * T) * np.sin(np.pi * t / (2 * T))),
    ]
    pressure = [PressureTest(md, prof, th, dth, name) for md in modes
                for name, prof in profiles.items() for th, dth in thetas]
    return plate, pressure


@dataclass
class ResidualReport:
    plate: float
    pressure: float
    details: list

    @property
    def max(self) -> float:
        return max(self.plate, self.pressure)


def weak_residual(ctx: OperatorContext, run: QSRun, sources: SourceTerms,
                  test_bank=None, d0: Optional[np.ndarray] = None) -> ResidualReport:
    """Evaluate both weak-form identities on the trajectory.

    Time integrals use the left-endpoint rule on the run's grid. The
    pressure identity is integrated by parts in time against tests with
    ``q(T) = 0``, so the datum enters as ``(d0, q(0))``. For each identity
    the largest residual over the bank is divided by the largest sum of
    term magnitudes over the bank; normalising per test would turn tests
    orthogonal to the solution into round-off ratios.
    """
    times = run.times
    T = times[-1]
    tau = run.tau
    plate_tests, pressure_tests = test_bank or default_test_bank(ctx, T)
    if d0 is None:
        d0 = run.states[0].zeta
    D, alpha, lam = ctx.params.D, ctx.params.alpha, ctx.lam
    shape, pshape = ctx.basis.shape, ctx.shape
    states = run.states[:-1]

    plate_terms = []
    for st in states:
        f = sources.f_at(st.t, shape)
        kp = moment(ctx.grid, st.p)
        plate_terms.append((D * lam ** 2 * st.w, -alpha * lam * kp, -f))
    details = []
    for test in plate_tests:
        i, j = ctx.basis.mode_index(*test.mode)
        parts = np.zeros(3)
        for st, terms in zip(states, plate_terms):
            th = float(test.theta(st.t))
            parts += tau * th * np.array([term[i, j] for term in terms])
        details.append(("plate", test.mode, "", abs(parts.sum()), np.abs(parts).sum()))

    w = ctx.grid.weights
    pressure_terms = []
    for st in states:
        Ap = apply_A(ctx, st.p, st.t)
        g = sources.g_at(st.t, pshape)
        pressure_terms.append((Ap * w, st.zeta * w, g * w))
    for test in pressure_tests:
        i, j = ctx.basis.mode_index(*test.mode)
        prof = test.profile
        a_part = z_part = g_part = 0.0
        for st, (Apw, zw, gw) in zip(states, pressure_terms):
            th, dth = float(test.theta(st.t)), float(test.dtheta(st.t))
            a_part += tau * th * np.dot(Apw[i, j], prof)
            z_part -= tau * dth * np.dot(zw[i, j], prof)
            g_part -= tau * th * np.dot(gw[i, j], prof)
        init_part = -float(test.theta(times[0])) * np.dot((d0 * w)[i, j], prof)
        parts = np.array([a_part, z_part, g_part, init_part])
        details.append(("pressure", test.mode, test.label, abs(parts.sum()), np.abs(parts).sum()))

    def worst(kind):
        rows = [d for d in details if d[0] == kind]
        scale = max((d[4] for d in rows), default=0.0)
        return max(d[3] for d in rows) / scale if scale > 0 else 0.0

    return ResidualReport(worst("plate"), worst("pressure"), details)


# Stability estimate.

def data_norms(ctx: OperatorContext, times: np.ndarray, sources: SourceTerms,
               d0: np.ndarray) -> dict:
    """Discrete ``||f||^2_{H^1(W')}``, ``||g||^2_{L^2(V')}`` and ``||d0||^2``."""
    tau = times[1] - times[0]
    shape, pshape = ctx.basis.shape, ctx.shape
    lam = ctx.lam
    f = np.stack([sources.f_at(t, shape) for t in times])
    fw = np.sum((f / lam) ** 2, axis=(1, 2))
    dfw = np.sum((np.diff(f, axis=0) / tau / lam) ** 2, axis=(1, 2))
    f_sq = tau * fw.sum() + tau * dfw.sum()
    g_sq = tau * sum(v_dual_norm_sq(ctx.grid, sources.g_at(t, pshape)) for t in times[1:])
    return {"f": float(f_sq), "g": float(g_sq), "d0": inner(ctx, d0, d0)}


def stability_report(ctx: OperatorContext, run: QSRun, sources: SourceTerms,
                     d0: Optional[np.ndarray] = None) -> dict:
    """Ratio of ``||p||^2_{l2(V)} + ||w||^2_{l2(W)}`` to the data norms.

    Zero data gives ratio 0 by definition.
    """
    if d0 is None:
        d0 = run.states[0].zeta
    tau = run.tau
    lhs = tau * sum(pressure_v_norm(ctx.grid, s.p) ** 2 + plate_w_norm(ctx.basis, s.w) ** 2
                    for s in run.states[1:])
    parts = data_norms(ctx, run.times, sources, d0)
    rhs = sum(parts.values())
    ratio = lhs / rhs if rhs > 0 else 0.0
    report = {"lhs": float(lhs), "rhs": float(rhs), "ratio": float(ratio), **parts}
    run.stability = report
    return report


def energy_series(ctx: OperatorContext, run: QSRun) -> np.ndarray:
    return np.array([s.energy for s in run.states])


def v_norm_sq(ctx: OperatorContext, p: np.ndarray) -> float:
    return inner(ctx, p, p) + dx3_norm_sq(ctx.grid, p)
