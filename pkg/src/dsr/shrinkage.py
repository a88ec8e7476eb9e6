"""Scalar and singular-value shrinkage operators.

``nu_shrink`` interpolates between soft thresholding (nu = 1) and hard
thresholding (nu -> 0): values with magnitude at most lam**(1/(2-nu)) are
zeroed, larger ones lose lam*|x|**(nu-1). Applied to singular values it
yields the proximal operators of the nuclear norm and of its nonconvex
low-rank generalization, which is what the solvers apply blockwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericError

__all__ = [
    "ShrinkParams",
    "shrink_threshold",
    "nu_shrink",
    "nu_huber",
    "prox_nuclear",
    "prox_low_rank",
]


@dataclass(frozen=True)
class ShrinkParams:
    """Validated regularization parameter bundle."""

    lam: float
    nu: float = 0.02
    rho: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise DataError(f"lam must be positive, got {self.lam}")
        if not 0.0 < self.nu <= 1.0:
            raise DataError(f"nu must lie in (0, 1], got {self.nu}")
        if not self.rho > 0:
            raise DataError(f"rho must be positive, got {self.rho}")


def _check_lam_nu(lam: float, nu: float, allow_zero_nu: bool) -> None:
    if not lam > 0:
        raise DataError(f"lam must be positive, got {lam}")
    lo_ok = nu > 0 or (allow_zero_nu and nu == 0)
    if not (lo_ok and nu <= 1.0):
        raise DataError(f"nu out of range: {nu}")


def shrink_threshold(lam: float, nu: float) -> float:
    """Magnitude below which the shrinkage maps to zero: lam**(1/(2-nu))."""
    return float(lam ** (1.0 / (2.0 - nu)))


def nu_shrink(x, lam: float, nu: float):
    """Pointwise shrinkage sign(x) * max(0, |x| - lam*|x|**(nu-1)).

    nu = 1 is classical soft thresholding; nu = 0 is the hard-thresholding
    limit. Accepts scalars or arrays; zero maps to zero.
    """
    _check_lam_nu(lam, nu, allow_zero_nu=True)
    arr = np.asarray(x, dtype=np.float64)
    mag = np.abs(arr)
    out = np.zeros_like(arr)
    active = mag > shrink_threshold(lam, nu)
    if np.any(active):
        m = mag[active]
        out[active] = np.sign(arr[active]) * np.maximum(m - lam * m ** (nu - 1.0), 0.0)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def nu_huber(x, lam: float, nu: float):
    """Smoothed penalty matching the shrinkage: quadratic below the threshold
    knee, |x|**nu / nu minus a continuity offset above it."""
    _check_lam_nu(lam, nu, allow_zero_nu=False)
    arr = np.asarray(x, dtype=np.float64)
    mag = np.abs(arr)
    knee = shrink_threshold(lam, nu)
    offset = (1.0 / nu - 0.5) * lam ** (nu / (2.0 - nu))
    out = np.where(mag < knee, mag ** 2 / (2.0 * lam), mag ** nu / nu - offset)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def _svd_shrink(mat: np.ndarray, fn) -> np.ndarray:
    arr = np.asarray(mat, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DataError("matrix entries must be finite")
    try:
        u, s, vh = np.linalg.svd(arr, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"SVD failed: {exc}") from exc
    return (u * fn(s)[..., None, :]) @ vh


def prox_nuclear(mat: np.ndarray, lam: float) -> np.ndarray:
    """Singular value soft thresholding, the proximal map of lam * nuclear norm.

    Accepts a single matrix or a stack of matrices (leading axes broadcast).
    """
    if lam < 0:
        raise DataError(f"lam must be nonnegative, got {lam}")
    if lam == 0:
        return np.asarray(mat, dtype=np.float64).copy()
    return _svd_shrink(mat, lambda s: np.maximum(s - lam, 0.0))


def prox_low_rank(mat: np.ndarray, lam: float, nu: float) -> np.ndarray:
    """Apply ``nu_shrink`` to the singular values; proximal map of the
    nonconvex low-rank penalty. Reduces to ``prox_nuclear`` at nu = 1."""
    _check_lam_nu(lam, nu, allow_zero_nu=True)
    return _svd_shrink(mat, lambda s: np.asarray(nu_shrink(s, lam, nu)))
