"""Physical parameters, permeability models, sources and initial data.

Everything here is immutable after construction. Validation never mutates
its input; it returns a :class:`ValidationReport` (parameters) or raises
with the report attached (permeability).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import BoundsViolation, EnvelopeViolation, PermeabilityEvalError

STRUCTURES = ("constant", "transverse", "general")

DEFAULT_TIME_SAMPLES = 64


@dataclass(frozen=True)
class PhysicalParams:
    """Plate and fluid constants.

    ``beta = alpha**2 / D`` is derived once at construction and stored.
    """

    D: float
    alpha: float
    c_p: float
    rho_p: float = 0.0
    h: float = 0.5
    beta: float = field(init=False)

    def __post_init__(self):
        D = float(self.D)
        beta = float(self.alpha) ** 2 / D if D != 0 else float("nan")
        object.__setattr__(self, "beta", beta)

    def replace(self, **changes) -> "PhysicalParams":
        kw = dict(D=self.D, alpha=self.alpha, c_p=self.c_p, rho_p=self.rho_p, h=self.h)
        kw.update(changes)
        return PhysicalParams(**kw)


@dataclass
class Check:
    name: str
    passed: bool
    message: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)
    observed: dict = field(default_factory=dict)

    def add(self, name, passed, message=""):
        self.checks.append(Check(name, bool(passed), message))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name} {c.message}".rstrip() for c in self.checks]
        return "\n".join(lines)


def validate_params(params: PhysicalParams, mode: Optional[str] = None) -> ValidationReport:
    """Check the sign conditions on the physical constants.

    ``mode`` adds the regime requirements: ``"quasistatic"`` needs ``c_p > 0``,
    ``"inertial"`` needs ``c_p > 0`` and ``rho_p > 0``.
    """
    rep = ValidationReport()
    rep.add("D_positive", params.D > 0, "" if params.D > 0 else "D must be positive")
    rep.add("alpha_positive", params.alpha > 0, "" if params.alpha > 0 else "alpha must be positive")
    rep.add("h_positive", params.h > 0, "" if params.h > 0 else "h must be positive")
    rep.add("c_p_nonnegative", params.c_p >= 0, "" if params.c_p >= 0 else "c_p must be nonnegative")
    rep.add("rho_p_nonnegative", params.rho_p >= 0,
            "" if params.rho_p >= 0 else "rho_p must be nonnegative")
    if params.D > 0:
        beta = params.alpha ** 2 / params.D
        ok = abs(beta - params.beta) <= 1e-15 * abs(beta)
        rep.add("beta_consistent", ok, f"beta={params.beta!r}")
        rep.observed["beta"] = beta
    else:
        rep.add("beta_consistent", False, "beta undefined for D <= 0")
    if mode in ("quasistatic", "inertial"):
        ok = params.c_p > 0
        rep.add("c_p_positive", ok, "" if ok else "incompressible case unsupported (c_p = 0)")
    if mode == "inertial":
        ok = params.rho_p > 0
        rep.add("rho_p_positive", ok, "" if ok else "inertial solver requires rho_p > 0")
    return rep


@dataclass(frozen=True)
class PermeabilityModel:
    """Evaluable permeability ``k(x1, x2, x3, t)`` with declared bounds.

    ``evaluate`` must broadcast over numpy arrays. ``dt_envelope`` bounds
    ``|dk/dt|`` pointwise; ``envelope_integral`` is its declared integral
    over the run interval, kept for reporting.
    """

    evaluate: Callable
    k_lower: float
    k_upper: float
    structure: str = "general"
    dt_envelope: Optional[Callable] = None
    envelope_integral: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        if self.structure not in STRUCTURES:
            raise ValueError(f"structure must be one of {STRUCTURES}, got {self.structure!r}")
        if not (self.k_lower > 0 and np.isfinite(self.k_upper) and self.k_upper >= self.k_lower):
            raise ValueError("need 0 < k_lower <= k_upper < inf")

    def sample(self, x1, x2, x3, t) -> np.ndarray:
        """Evaluate and enforce the declared bounds on every sample."""
        try:
            k = np.asarray(self.evaluate(x1, x2, x3, t), dtype=float)
        except Exception as exc:  # user callables can fail in any way
            raise PermeabilityEvalError(f"permeability evaluation failed at t={t}: {exc}") from exc
        k = np.broadcast_to(k, np.broadcast_shapes(np.shape(x1), np.shape(x2), np.shape(x3), k.shape))
        if not np.all(np.isfinite(k)):
            raise PermeabilityEvalError(f"non-finite permeability at t={t}")
        lo, hi = k.min(), k.max()
        if lo < self.k_lower or hi > self.k_upper:
            raise BoundsViolation(
                f"permeability sample range [{lo:.6g}, {hi:.6g}] leaves declared "
                f"bounds [{self.k_lower:.6g}, {self.k_upper:.6g}] at t={t}"
            )
        return k


def constant_permeability(k0: float = 1.0, k_lower=None, k_upper=None) -> PermeabilityModel:
    def evaluate(x1, x2, x3, t):
        return np.full(np.broadcast_shapes(np.shape(x1), np.shape(x2), np.shape(x3)), float(k0))

    return PermeabilityModel(
        evaluate,
        k_lower=k0 if k_lower is None else k_lower,
        k_upper=k0 if k_upper is None else k_upper,
        structure="constant",
        dt_envelope=lambda t: 0.0 * np.asarray(t, dtype=float),
        envelope_integral=0.0,
        name="constant",
    )


def sin_in_time_permeability(k0=1.0, amplitude=0.5, omega=1.0, k_lower=None, k_upper=None):
    """``k = k0 (1 + amplitude sin(omega t))``, uniform in space."""
    if not 0 <= amplitude < 1:
        raise ValueError("amplitude must lie in [0, 1)")

    def evaluate(x1, x2, x3, t):
        shape = np.broadcast_shapes(np.shape(x1), np.shape(x2), np.shape(x3))
        return np.full(shape, k0 * (1.0 + amplitude * np.sin(omega * t)))

    rate = k0 * amplitude * abs(omega)
    return PermeabilityModel(
        evaluate,
        k_lower=k0 * (1 - amplitude) if k_lower is None else k_lower,
        k_upper=k0 * (1 + amplitude) if k_upper is None else k_upper,
        structure="transverse",
        dt_envelope=lambda t: np.full(np.shape(t), rate),
        name="sin-in-time",
    )


def layered_x3_permeability(k_top=2.0, k_bottom=0.5, k_lower=None, k_upper=None):
    """Two layers: ``k_top`` for ``x3 > 0`` and ``k_bottom`` below."""

    def evaluate(x1, x2, x3, t):
        shape = np.broadcast_shapes(np.shape(x1), np.shape(x2), np.shape(x3))
        return np.broadcast_to(np.where(np.asarray(x3) > 0, k_top, k_bottom), shape).astype(float)

    return PermeabilityModel(
        evaluate,
        k_lower=min(k_top, k_bottom) if k_lower is None else k_lower,
        k_upper=max(k_top, k_bottom) if k_upper is None else k_upper,
        structure="transverse",
        dt_envelope=lambda t: 0.0 * np.asarray(t, dtype=float),
        envelope_integral=0.0,
        name="layered-x3",
    )


PERMEABILITY_PRESETS = {
    "constant": constant_permeability,
    "sin-in-time": sin_in_time_permeability,
    "layered-x3": layered_x3_permeability,
}


def make_permeability(preset: str, **kwargs) -> PermeabilityModel:
    try:
        factory = PERMEABILITY_PRESETS[preset]
    except KeyError:
        raise ValueError(f"unknown permeability preset {preset!r}") from None
    return factory(**kwargs)


def validate_permeability(k: PermeabilityModel, sample_grid, T: float, h: float = 0.5,
                          n_times: int = DEFAULT_TIME_SAMPLES) -> ValidationReport:
    """Sample ``k`` on the in-plane points of ``sample_grid`` times the
    transverse nodes and midpoints, at ``n_times`` uniform times in ``[0, T]``.

    Raises :class:`BoundsViolation` or :class:`EnvelopeViolation` with the
    report attached; returns the report otherwise.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if n_times < 2:
        raise ValueError("need at least two time samples")
    M, N, N3 = sample_grid.M, sample_grid.N, sample_grid.N3
    x1 = np.arange(1, M + 1) / (M + 1)
    x2 = np.arange(1, N + 1) / (N + 1)
    z = np.linspace(-h, h, N3)
    z = np.sort(np.concatenate([z, 0.5 * (z[1:] + z[:-1])]))
    X1, X2, Z = np.meshgrid(x1, x2, z, indexing="ij")
    times = np.linspace(0.0, T, n_times)

    rep = ValidationReport()
    samples = []
    for t in times:
        try:
            vals = np.asarray(k.evaluate(X1, X2, Z, t), dtype=float)
        except Exception as exc:
            raise PermeabilityEvalError(f"permeability evaluation failed at t={t}: {exc}") from exc
        samples.append(np.broadcast_to(vals, X1.shape))
    samples = np.stack(samples)
    kmin, kmax = float(samples.min()), float(samples.max())
    rep.observed.update(k_min=kmin, k_max=kmax)
    finite = bool(np.all(np.isfinite(samples)))
    rep.add("finite", finite)
    rep.add("lower_bound", finite and kmin >= k.k_lower, f"min={kmin:.6g} k_lower={k.k_lower:.6g}")
    rep.add("upper_bound", finite and kmax <= k.k_upper, f"max={kmax:.6g} k_upper={k.k_upper:.6g}")
    if not rep.passed:
        raise BoundsViolation("permeability violates its declared bounds: "
                              + "; ".join(f"{c.name} {c.message}" for c in rep.failures), rep)

    if k.dt_envelope is not None:
        dt = times[1] - times[0]
        rate = np.abs(samples[2:] - samples[:-2]) / (2 * dt)
        env = np.asarray(k.dt_envelope(times[1:-1]), dtype=float).reshape(-1, *([1] * X1.ndim))
        excess = float(np.max(rate - env)) if rate.size else 0.0
        rep.observed["max_dt_rate"] = float(rate.max()) if rate.size else 0.0
        rep.observed["envelope_integral"] = float(np.trapezoid(np.asarray(k.dt_envelope(times), float), times))
        rep.add("dt_envelope", excess <= 0.0, f"max excess={excess:.3e}")
        if excess > 0.0:
            raise EnvelopeViolation("sampled |dk/dt| exceeds the declared envelope", rep)
    return rep


@dataclass(frozen=True)
class SourceTerms:
    """Plate load ``f`` and fluid source ``g`` as functions of time.

    ``f(t)`` returns modal plate coefficients of shape ``(M, N)``; ``g(t)``
    returns a modal pressure array ``(M, N, N3)``. ``None`` means zero.
    """

    f: Optional[Callable] = None
    g: Optional[Callable] = None
    f_time_regularity: bool = True

    def f_at(self, t, shape):
        if self.f is None:
            return np.zeros(shape)
        out = np.asarray(self.f(t), dtype=float)
        if not np.all(np.isfinite(out)):
            raise ValueError(f"plate load is not finite at t={t}")
        return out

    def g_at(self, t, shape):
        if self.g is None:
            return np.zeros(shape)
        out = np.asarray(self.g(t), dtype=float)
        if not np.all(np.isfinite(out)):
            raise ValueError(f"fluid source is not finite at t={t}")
        return out

    @property
    def is_zero(self):
        return self.f is None and self.g is None


INITIAL_KINDS = ("d0", "p0", "inertial")


@dataclass(frozen=True)
class InitialData:
    """Initial datum in modal layout.

    ``kind="d0"`` carries the fluid content, ``kind="p0"`` the pressure and
    ``kind="inertial"`` the triple ``(w0, w1, d0)``.
    """

    kind: str
    d0: Optional[np.ndarray] = None
    p0: Optional[np.ndarray] = None
    w0: Optional[np.ndarray] = None
    w1: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ValueError(f"kind must be one of {INITIAL_KINDS}")
        if self.kind in ("d0", "p0"):
            given = [x is not None for x in (self.d0, self.p0)]
            if sum(given) != 1:
                raise ValueError("quasi-static initial data needs exactly one of d0 / p0")
            if self.kind == "d0" and self.d0 is None or self.kind == "p0" and self.p0 is None:
                raise ValueError(f"kind={self.kind!r} but that field is missing")
        if self.kind == "inertial" and any(x is None for x in (self.w0, self.w1, self.d0)):
            raise ValueError("inertial initial data needs w0, w1 and d0")
