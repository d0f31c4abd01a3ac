"""Matrix-free pressure and plate operators.

All pressure arrays are modal, shape ``(M, N, N3)``; plate arrays are
``(M, N)``. Functionals are represented by their Riesz representatives
under the trapezoid-weighted pairing, so every operator below that is
self-adjoint in the continuum is self-adjoint in :func:`inner`.

Sign convention: the Dirichlet Laplacian acts on mode ``(m, n)`` as
``-lambda_mn``. The plate equation ``D lap^2 w + alpha lap K p = f`` is
therefore ``D lambda^2 w - alpha lambda Kp = f`` modally.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .discretization import (
    SineBasis, TransverseGrid, build_transverse_grid, lift_moment, moment, plan_basis,
    pressure_v_norm,
)
from .errors import SizeError, ValidationError
from .linalg import DEFAULT_TOL, CGResult, pcg, tridiag_solve
from .model import PermeabilityModel, PhysicalParams, constant_permeability, validate_params

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class OperatorContext:
    params: PhysicalParams
    basis: SineBasis
    grid: TransverseGrid
    permeability: PermeabilityModel
    _kcache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        rep = validate_params(self.params)
        if not rep.passed:
            raise ValidationError("invalid physical parameters: "
                                  + "; ".join(c.message for c in rep.failures), rep)
        if abs(self.grid.h - self.params.h) > 1e-14 * self.params.h:
            raise ValueError("transverse grid half-thickness differs from params.h")

    @property
    def beta(self) -> float:
        return self.params.beta

    @property
    def lam(self) -> np.ndarray:
        return self.basis.eigenvalues

    @property
    def shape(self):
        return (self.basis.M, self.basis.N, self.grid.N3)

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    @property
    def general(self) -> bool:
        return self.permeability.structure == "general"

    def kmid(self, t: float) -> np.ndarray:
        """Permeability at cell midpoints, bounds-checked.

        Shape ``(N3-1,)`` unless the model is general, then ``(M, N, N3-1)``
        on the in-plane collocation points.
        """
        t = float(t)
        k = self._kcache.get(t)
        if k is not None:
            return k
        z = self.grid.midpoints
        if self.general:
            x1, x2 = self.basis.points
            k = self.permeability.sample(x1[:, None, None], x2[None, :, None], z[None, None, :], t)
        else:
            k = self.permeability.sample(0.5, 0.5, z, t)
        k = np.array(k, dtype=float)
        k.setflags(write=False)
        if len(self._kcache) > 8:
            self._kcache.clear()
        self._kcache[t] = k
        return k

    def with_params(self, **changes) -> "OperatorContext":
        return OperatorContext(self.params.replace(**changes), self.basis, self.grid,
                               self.permeability)


def make_context(params: PhysicalParams, M: int, N: int, N3: int,
                 permeability: Optional[PermeabilityModel] = None) -> OperatorContext:
    return OperatorContext(params, plan_basis(M, N), build_transverse_grid(N3, params.h),
                           permeability or constant_permeability(1.0))


def inner(ctx: OperatorContext, p: np.ndarray, q: np.ndarray) -> float:
    """Discrete L2(Omega_p) inner product of two modal pressure arrays."""
    return float(np.sum(p * q * ctx.grid.weights))


def apply_A(ctx: OperatorContext, p: np.ndarray, t: float) -> np.ndarray:
    """Riesz representative of ``q -> (k d3 p, d3 q)`` at time ``t``."""
    k = ctx.kmid(t)
    grid = ctx.grid
    if ctx.general:
        pc = ctx.basis.to_collocation(p)
        return ctx.basis.to_modal(grid.stiffness(k, pc) / grid.weights)
    return grid.stiffness(k, p) / grid.weights


def a_form(ctx: OperatorContext, p: np.ndarray, q: np.ndarray, t: float) -> float:
    return inner(ctx, apply_A(ctx, p, t), q)


def apply_B(ctx: OperatorContext, p: np.ndarray) -> np.ndarray:
    return ctx.beta * lift_moment(ctx.grid, moment(ctx.grid, p))


def apply_B_via_diagram(ctx: OperatorContext, p: np.ndarray) -> np.ndarray:
    """B composed link by link: K, -alpha lap, (D E)^-1, lap, -alpha K~."""
    lam = ctx.lam
    D, alpha = ctx.params.D, ctx.params.alpha
    q = moment(ctx.grid, p)
    load = -alpha * (-lam * q)
    w = load / (D * lam ** 2)
    lap_w = -lam * w
    return -alpha * lift_moment(ctx.grid, lap_w)


def apply_fluid_content(ctx: OperatorContext, p: np.ndarray) -> np.ndarray:
    return ctx.params.c_p * p + apply_B(ctx, p)


def _require_compressible(ctx):
    if not ctx.params.c_p > 0:
        raise ValidationError("incompressible case unsupported (c_p = 0)")


def solve_fluid_content(ctx: OperatorContext, d: np.ndarray, tol: float = DEFAULT_TOL,
                        maxiter: Optional[int] = None, x0=None) -> CGResult:
    _require_compressible(ctx)
    c = ctx.params.c_p
    return pcg(lambda x: apply_fluid_content(ctx, x), d, lambda a, b: inner(ctx, a, b),
               precond=lambda r: r / c, tol=tol, maxiter=maxiter, x0=x0)


def invert_fluid_content(ctx: OperatorContext, d: np.ndarray, tol: float = DEFAULT_TOL,
                         maxiter: Optional[int] = None) -> np.ndarray:
    """Solve ``(c_p I + B) p = d`` by CG; raises :class:`NoConvergence` at the cap."""
    return solve_fluid_content(ctx, d, tol, maxiter).x


def fluid_content_bounds(ctx: OperatorContext, eps: float = 1e-9):
    """Constants ``(c, C)`` of ``c ||d|| <= ||(c_p + B)^-1 d|| <= C ||d||``."""
    h = ctx.params.h
    return 1.0 / (ctx.params.c_p + ctx.beta * 2 * h ** 3 / 3 + eps), 1.0 / ctx.params.c_p


def solve_plate(ctx: OperatorContext, pressure_moment: np.ndarray, f: np.ndarray) -> np.ndarray:
    lam = ctx.lam
    return (f + ctx.params.alpha * lam * pressure_moment) / (ctx.params.D * lam ** 2)


def apply_plate(ctx: OperatorContext, w: np.ndarray, pressure_moment: np.ndarray) -> np.ndarray:
    """Modal ``D lap^2 w + alpha lap (K p)``."""
    lam = ctx.lam
    return ctx.params.D * lam ** 2 * w - ctx.params.alpha * lam * pressure_moment


def fluid_content(ctx: OperatorContext, p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``zeta = c_p p - alpha x3 lap w``."""
    return ctx.params.c_p * p + ctx.params.alpha * lift_moment(ctx.grid, ctx.lam * w)


# Backward-Euler pencil (c_p I + B + tau A(t)).

def apply_step_operator(ctx: OperatorContext, p: np.ndarray, tau: float, t: float) -> np.ndarray:
    return apply_fluid_content(ctx, p) + tau * apply_A(ctx, p, t)


def _tridiag_bands(ctx: OperatorContext, shift: float, tau: float, t: float):
    """Bands of ``shift W + tau S(k)`` along x3."""
    k = ctx.kmid(t)
    dz = ctx.grid.dz
    pad = np.zeros(k.shape[:-1] + (1,))
    left = np.concatenate([pad, k], axis=-1)
    right = np.concatenate([k, pad], axis=-1)
    diag = shift * ctx.grid.weights + tau * (left + right) / dz
    off = -tau * k / dz
    return diag, off


def columnwise_solve(ctx: OperatorContext, r: np.ndarray, shift: float, tau: float,
                     t: float) -> np.ndarray:
    """Apply ``(shift I + tau A(t))^-1`` exactly, column by column."""
    diag, off = _tridiag_bands(ctx, shift, tau, t)
    rhs_w = r * ctx.grid.weights
    if ctx.general:
        x = tridiag_solve(diag, off, ctx.basis.to_collocation(rhs_w))
        return ctx.basis.to_modal(x)
    return tridiag_solve(diag, off, rhs_w)


def solve_step_system(ctx: OperatorContext, rhs: np.ndarray, tau: float, t: float,
                      tol: float = DEFAULT_TOL, maxiter: Optional[int] = None,
                      x0=None) -> CGResult:
    """CG on ``(c_p I + B + tau A(t)) p = rhs`` preconditioned by ``c_p I + tau A(t)``."""
    _require_compressible(ctx)
    c = ctx.params.c_p
    return pcg(lambda x: apply_step_operator(ctx, x, tau, t), rhs,
               lambda a, b: inner(ctx, a, b),
               precond=lambda r: columnwise_solve(ctx, r, c, tau, t),
               tol=tol, maxiter=maxiter, x0=x0)


def coercivity_terms(ctx: OperatorContext, p: np.ndarray, t: float):
    """Return ``(((c_p+B)p, p) + 2 (A p, p), min(c_p, k_lower) ||p||_V^2)``."""
    lhs = inner(ctx, apply_fluid_content(ctx, p), p) + 2 * a_form(ctx, p, p, t)
    rhs = min(ctx.params.c_p, ctx.permeability.k_lower) * pressure_v_norm(ctx.grid, p) ** 2
    return lhs, rhs


@dataclass
class DenseOracle:
    """Explicit matrices of the matrix-free operators, built column by column.

    ``A``, ``B`` and ``C = c_p I + B`` map modal pressure vectors to modal
    pressure vectors; ``A_form`` and ``B_form`` are the corresponding
    bilinear-form (Gram) matrices, which must be symmetric. ``plate`` maps
    pressure to plate displacement at zero load.
    """

    t: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    plate: np.ndarray
    weights: np.ndarray
    symmetry: dict

    @property
    def A_form(self):
        return self.weights[:, None] * self.A

    @property
    def B_form(self):
        return self.weights[:, None] * self.B

    def step_matrix(self, tau: float) -> np.ndarray:
        return self.C + tau * self.A


def _columns(fn, n_in, shape_in):
    cols = []
    for j in range(n_in):
        e = np.zeros(n_in)
        e[j] = 1.0
        cols.append(np.ravel(fn(e.reshape(shape_in))))
    return np.array(cols).T


def build_dense_oracle(ctx: OperatorContext, t: float = 0.0) -> DenseOracle:
    n = int(np.prod(ctx.shape))
    if n > DENSE_LIMIT:
        raise SizeError(f"dense oracle limited to {DENSE_LIMIT} unknowns, got {n}")
    A = _columns(lambda p: apply_A(ctx, p, t), n, ctx.shape)
    B = _columns(lambda p: apply_B(ctx, p), n, ctx.shape)
    C = _columns(lambda p: apply_fluid_content(ctx, p), n, ctx.shape)
    plate = _columns(lambda p: solve_plate(ctx, moment(ctx.grid, p), np.zeros(ctx.basis.shape)),
                     n, ctx.shape)
    weights = np.broadcast_to(ctx.grid.weights, ctx.shape).ravel().copy()
    oracle = DenseOracle(t, A, B, C, plate, weights, {})
    for name, mat in (("A", oracle.A_form), ("B", oracle.B_form)):
        scale = np.linalg.norm(mat)
        oracle.symmetry[name] = float(np.linalg.norm(mat - mat.T) / scale) if scale else 0.0
    bad = {k: v for k, v in oracle.symmetry.items() if v > 1e-12}
    if bad:
        raise AssertionError(f"dense oracle forms not symmetric: {bad}")
    return oracle
