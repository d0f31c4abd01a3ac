"""In-plane sine modes on the unit square and the transverse grid on (-h, h).

Layout convention: a pressure array has shape ``(M, N, N3)`` (mode-major,
x3-minor); a plate array has shape ``(M, N)``. Modal arrays hold
coefficients of the orthonormal basis ``phi_mn = 2 sin(m pi x1) sin(n pi x2)``;
collocation arrays hold point values at ``(i/(M+1), j/(N+1))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import fft

from .errors import SizeError
from .linalg import tridiag_solve

MAX_UNKNOWNS = 2 ** 24

# DST-I with norm="ortho" is an orthogonal involution; the only scale between
# coefficients of phi_mn and point values is sqrt((M+1)(N+1)).
DST_TYPE = 1


@dataclass(frozen=True)
class GridSpec:
    M: int
    N: int
    N3: int

    @property
    def unknowns(self) -> int:
        return self.M * self.N * self.N3


@dataclass(frozen=True)
class SineBasis:
    M: int
    N: int
    eigenvalues: np.ndarray = field(repr=False)
    scale: float

    @property
    def shape(self):
        return (self.M, self.N)

    @property
    def points(self):
        return np.arange(1, self.M + 1) / (self.M + 1), np.arange(1, self.N + 1) / (self.N + 1)

    def to_collocation(self, coeffs: np.ndarray) -> np.ndarray:
        return self.scale * fft.dstn(coeffs, type=DST_TYPE, axes=(0, 1), norm="ortho")

    def to_modal(self, values: np.ndarray) -> np.ndarray:
        return fft.dstn(values, type=DST_TYPE, axes=(0, 1), norm="ortho") / self.scale

    def evaluate(self, coeffs: np.ndarray, x1, x2) -> np.ndarray:
        """Sum the sine series at the points ``(x1[i], x2[i])``.

        Returns shape ``(P,)`` for plate coefficients, ``(P, N3)`` for pressure.
        """
        x1 = np.atleast_1d(np.asarray(x1, float))
        x2 = np.atleast_1d(np.asarray(x2, float))
        s1 = np.sqrt(2) * np.sin(np.pi * np.outer(x1, np.arange(1, self.M + 1)))
        s2 = np.sqrt(2) * np.sin(np.pi * np.outer(x2, np.arange(1, self.N + 1)))
        return np.einsum("pm,mn...,pn->p...", s1, coeffs, s2)

    def mode_index(self, m: int, n: int):
        if not (1 <= m <= self.M and 1 <= n <= self.N):
            raise ValueError(f"mode ({m}, {n}) outside basis {self.M}x{self.N}")
        return m - 1, n - 1


def plan_basis(M: int, N: int) -> SineBasis:
    if M < 1 or N < 1:
        raise ValueError("M and N must be at least 1")
    if M * N > MAX_UNKNOWNS:
        raise SizeError(f"M*N = {M * N} exceeds the limit {MAX_UNKNOWNS}")
    m = np.arange(1, M + 1)[:, None]
    n = np.arange(1, N + 1)[None, :]
    lam = np.pi ** 2 * (m ** 2 + n ** 2).astype(float)
    lam.setflags(write=False)
    return SineBasis(M, N, lam, float(np.sqrt((M + 1) * (N + 1))))


@dataclass(frozen=True)
class TransverseGrid:
    """Uniform nodes on [-h, h] with trapezoid weights.

    The stiffness form is ``p^T S(k) q = sum_e k_e (p_{e+1}-p_e)(q_{e+1}-q_e)/dz``
    with ``k_e`` sampled at cell midpoints. Its Riesz representative with
    respect to the weighted pairing is ``S p / weights``, which is the
    ghost-node Neumann stencil at the two end nodes.
    """

    N3: int
    h: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    moments: np.ndarray = field(repr=False)
    midpoints: np.ndarray = field(repr=False)

    @property
    def dz(self) -> float:
        return 2.0 * self.h / (self.N3 - 1)

    @property
    def second_moment(self) -> float:
        """Discrete ``int x3^2 dx3``; the exact value is ``2 h^3 / 3``."""
        return float(np.dot(self.moments, self.nodes))

    def stiffness(self, kmid, p: np.ndarray) -> np.ndarray:
        """Apply ``S(k)`` along the last axis; ``kmid`` broadcasts against ``diff(p)``."""
        flux = np.asarray(kmid) * np.diff(p, axis=-1) / self.dz
        out = np.zeros(np.broadcast_shapes(p.shape, flux.shape[:-1] + (self.N3,)))
        out[..., :-1] -= flux
        out[..., 1:] += flux
        return out

    def inner(self, p: np.ndarray, q: np.ndarray) -> float:
        return float(np.sum(p * q * self.weights))


def build_transverse_grid(N3: int, h: float) -> TransverseGrid:
    if N3 < 3:
        raise ValueError("N3 must be at least 3")
    if h <= 0:
        raise ValueError("h must be positive")
    z = np.linspace(-h, h, N3)
    z = 0.5 * (z - z[::-1])  # exact antisymmetry
    dz = 2.0 * h / (N3 - 1)
    w = np.full(N3, dz)
    w[0] = w[-1] = dz / 2
    m = w * z
    mid = 0.5 * (z[1:] + z[:-1])
    for a in (z, w, m, mid):
        a.setflags(write=False)
    return TransverseGrid(N3, float(h), z, w, m, mid)


def moment(grid: TransverseGrid, p: np.ndarray) -> np.ndarray:
    """Transverse first moment ``sum_j m_j p_j`` (modal or collocation, same layout out)."""
    return p @ grid.moments


def lift_moment(grid: TransverseGrid, q: np.ndarray) -> np.ndarray:
    """Multiply a plate-shaped array by ``x3`` layer-wise; adjoint of :func:`moment`."""
    return np.multiply.outer(q, grid.nodes)


# Norms. Modal arrays are used throughout; Parseval makes these the
# discrete L2 norms of the corresponding fields.

def plate_l2(w: np.ndarray) -> float:
    return float(np.sqrt(np.sum(w * w)))


def plate_w_norm(basis: SineBasis, w: np.ndarray) -> float:
    """``||Delta w||`` computed modally."""
    return float(np.sqrt(np.sum((basis.eigenvalues * w) ** 2)))


def pressure_inner(grid: TransverseGrid, p: np.ndarray, q: np.ndarray) -> float:
    return grid.inner(p, q)


def pressure_l2(grid: TransverseGrid, p: np.ndarray) -> float:
    return float(np.sqrt(grid.inner(p, p)))


def dx3_norm_sq(grid: TransverseGrid, p: np.ndarray) -> float:
    """``||d3 p||^2`` as the k=1 stiffness form."""
    return float(np.sum(np.diff(p, axis=-1) ** 2) / grid.dz)


def pressure_v_norm(grid: TransverseGrid, p: np.ndarray) -> float:
    return float(np.sqrt(grid.inner(p, p) + dx3_norm_sq(grid, p)))


def v_dual_norm_sq(grid: TransverseGrid, g: np.ndarray) -> float:
    """``||g||^2_{V'}`` for a functional represented by ``g`` in the weighted pairing.

    In-plane modes decouple, so the Riesz map of ``V`` is one shared
    tridiagonal solve ``(W + S(1)) r = W g`` per column.
    """
    diag = grid.weights.copy()
    diag[:-1] += 1.0 / grid.dz
    diag[1:] += 1.0 / grid.dz
    off = np.full(grid.N3 - 1, -1.0 / grid.dz)
    wg = g * grid.weights
    return float(np.sum(wg * tridiag_solve(diag, off, wg)))


@dataclass
class PlateField:
    coeffs: np.ndarray
    role: str = "w"

    def __post_init__(self):
        if self.role not in ("w", "v", "f"):
            raise ValueError("role must be one of 'w', 'v', 'f'")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("plate field has non-finite entries")

    def w_norm(self, basis: SineBasis) -> float:
        return plate_w_norm(basis, self.coeffs)

    def values(self, basis: SineBasis) -> np.ndarray:
        return basis.to_collocation(self.coeffs)


@dataclass
class PressureField:
    values: np.ndarray
    basis: SineBasis
    grid: TransverseGrid
    layout: str = "modal"

    def __post_init__(self):
        if self.layout not in ("modal", "collocation"):
            raise ValueError("layout must be 'modal' or 'collocation'")
        expect = (self.basis.M, self.basis.N, self.grid.N3)
        if self.values.shape != expect:
            raise ValueError(f"pressure shape {self.values.shape} != {expect}")

    def to_modal(self) -> "PressureField":
        if self.layout == "modal":
            return self
        return PressureField(self.basis.to_modal(self.values), self.basis, self.grid, "modal")

    def to_collocation(self) -> "PressureField":
        if self.layout == "collocation":
            return self
        return PressureField(self.basis.to_collocation(self.values), self.basis, self.grid,
                             "collocation")

    @property
    def modal(self) -> np.ndarray:
        return self.to_modal().values

    def l2_norm(self) -> float:
        return pressure_l2(self.grid, self.modal)

    def v_norm(self) -> float:
        return pressure_v_norm(self.grid, self.modal)


def random_field(rng: np.random.Generator, shape, smooth: Optional[SineBasis] = None) -> np.ndarray:
    """Gaussian coefficients, optionally damped as ``lambda_mn**-2`` for smooth data."""
    out = rng.standard_normal(shape)
    if smooth is not None:
        damp = (2 * np.pi ** 2 / smooth.eigenvalues) ** 2
        out = out * (damp if len(shape) == 2 else damp[..., None])
    return out
