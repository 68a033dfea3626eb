"""Dense complex linear algebra shared by the rest of the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  The helpers
here add the checks the callers rely on: deterministic eigenvalue ordering,
residual-certified diagonalisation and conditioning guards on inversion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

IDENTITY_TOL = 1e-9
DERIVATIVE_TOL = 1e-6
INVERT_TOL = 1e-13


class NumericsError(ValueError):
    """Raised when a matrix operation cannot be certified."""


def as_cmatrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise NumericsError(f"expected a 2-d array, got shape {a.shape}")
    if a.size == 0:
        raise NumericsError("empty matrix")
    return a


def _square(m) -> np.ndarray:
    a = as_cmatrix(m)
    if a.shape[0] != a.shape[1]:
        raise NumericsError(f"matrix is not square: {a.shape}")
    return a


def opnorm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def inv(m, rel_tol: float = INVERT_TOL) -> np.ndarray:
    """Inverse that refuses numerically singular input."""
    a = _square(m)
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0 or s[-1] < rel_tol * s[0]:
        raise NumericsError(
            f"matrix is numerically singular (sigma_min/sigma_max = {s[-1] / s[0] if s[0] else 0:.3e})"
        )
    return np.linalg.inv(a)


def sort_key(z: complex) -> tuple[float, float]:
    return (float(np.real(z)), float(np.imag(z)))


@dataclass(frozen=True)
class EigenDecomp:
    values: np.ndarray
    vectors: np.ndarray
    residual: float

    def reconstruct(self) -> np.ndarray:
        return self.vectors @ np.diag(self.values) @ np.linalg.inv(self.vectors)


def eig(m, tol: float = IDENTITY_TOL) -> EigenDecomp:
    """Eigendecomposition with values sorted by (real, imag).

    ``residual`` is ``||M V - V diag(values)||`` relative to ``||M||`` with
    unit-norm eigenvector columns.  Decompositions whose residual exceeds
    ``tol`` or whose eigenvector matrix is numerically singular (a Jordan
    block or a near-degenerate input) raise ``NumericsError``.
    """
    a = _square(m)
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericsError(f"eigensolver failed: {exc}") from exc
    order = sorted(range(len(w)), key=lambda i: sort_key(w[i]))
    w = w[order]
    v = v[:, order]
    v = v / np.linalg.norm(v, axis=0)
    scale = max(opnorm(a), np.finfo(float).tiny)
    residual = float(np.linalg.norm(a @ v - v * w, 2) / scale)
    if not np.isfinite(residual) or residual > tol:
        raise NumericsError(f"eigen-residual {residual:.3e} exceeds tolerance {tol:.1e}")
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > 1.0 / (tol * 1e-3):
        raise NumericsError(f"eigenvector matrix is ill-conditioned (cond = {cond:.3e})")
    return EigenDecomp(values=w, vectors=v, residual=residual)


def mat_fn(m, f: Callable[[np.ndarray], np.ndarray], tol: float = IDENTITY_TOL) -> np.ndarray:
    """Apply a scalar function through the eigendecomposition: V f(D) V^-1.

    ``f`` is called on the array of eigenvalues and must return finite values.
    No series fallback: a degenerate input surfaces as ``NumericsError``.
    """
    d = eig(m, tol=tol)
    fv = np.asarray(f(d.values), dtype=complex)
    if fv.shape != d.values.shape or not np.all(np.isfinite(fv)):
        raise NumericsError("function is undefined at an eigenvalue")
    return (d.vectors * fv) @ np.linalg.inv(d.vectors)


def rank_tol(m, rel_tol: float = 1e-9) -> int:
    """Number of singular values above ``rel_tol`` times the largest."""
    if not 0 < rel_tol < 1:
        raise NumericsError("rel_tol must lie in (0, 1)")
    a = as_cmatrix(m)
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def matpow(m: np.ndarray, k: int) -> np.ndarray:
    if k >= 0:
        return np.linalg.matrix_power(m, k)
    return np.linalg.matrix_power(inv(m), -k)
