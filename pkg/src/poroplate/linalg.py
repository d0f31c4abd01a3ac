"""Krylov and banded solvers used by the time steppers."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solveh_banded

from .errors import NoConvergence

DEFAULT_TOL = 1e-10


def default_maxiter(n: int) -> int:
    return int(10 * np.sqrt(n)) + 100


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float


def pcg(apply_op: Callable, b: np.ndarray, inner: Callable, precond: Optional[Callable] = None,
        x0: Optional[np.ndarray] = None, tol: float = DEFAULT_TOL,
        maxiter: Optional[int] = None) -> CGResult:
    """Preconditioned CG for an operator self-adjoint in the pairing ``inner``.

    Stops when ``||b - A x|| <= tol ||b||`` in the norm induced by ``inner``.
    ``precond`` must be self-adjoint and positive in the same pairing.
    """
    if maxiter is None:
        maxiter = default_maxiter(b.size)
    bnorm = np.sqrt(inner(b, b))
    if bnorm == 0.0:
        return CGResult(np.zeros_like(b), 0, 0.0)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply_op(x) if x0 is not None else b.copy()
    z = precond(r) if precond else r
    d = z.copy()
    rz = inner(r, z)
    res = np.sqrt(inner(r, r)) / bnorm
    it = 0
    while res > tol:
        if it >= maxiter:
            raise NoConvergence(it, res)
        Ad = apply_op(d)
        dAd = inner(d, Ad)
        if dAd <= 0:
            raise NoConvergence(it, res, f"operator not positive definite (d.Ad = {dAd:.3e})")
        a = rz / dAd
        x += a * d
        r -= a * Ad
        it += 1
        res = np.sqrt(inner(r, r)) / bnorm
        z = precond(r) if precond else r
        rz_new = inner(r, z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    return CGResult(x, it, float(res))


def tridiag_solve(diag: np.ndarray, off: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve symmetric positive definite tridiagonal systems along the last axis.

    ``diag`` has shape ``(..., n)`` and ``off`` ``(..., n-1)``. When both are
    1-D the matrix is shared by every right-hand side and a single banded
    Cholesky is used; otherwise a vectorised Thomas sweep runs per column.
    """
    if diag.ndim == 1 and off.ndim == 1:
        n = diag.size
        ab = np.zeros((2, n))
        ab[0, 1:] = off
        ab[1] = diag
        flat = rhs.reshape(-1, n).T
        return solveh_banded(ab, flat, check_finite=False).T.reshape(rhs.shape)

    diag, off, rhs = np.broadcast_arrays(diag, np.concatenate(
        [off, np.zeros(off.shape[:-1] + (1,))], axis=-1), rhs)
    n = diag.shape[-1]
    c = np.empty(diag.shape)
    d = np.empty(diag.shape)
    c[..., 0] = off[..., 0] / diag[..., 0]
    d[..., 0] = rhs[..., 0] / diag[..., 0]
    for i in range(1, n):
        den = diag[..., i] - off[..., i - 1] * c[..., i - 1]
        c[..., i] = off[..., i] / den
        d[..., i] = (rhs[..., i] - off[..., i - 1] * d[..., i - 1]) / den
    x = np.empty(diag.shape)
    x[..., -1] = d[..., -1]
    for i in range(n - 2, -1, -1):
        x[..., i] = d[..., i] - c[..., i] * x[..., i + 1]
    return x
