"""Scalar special functions and Gaussian kernels shared by the other modules."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "KernelParams",
    "lambert_w0",
    "normal_cdf",
    "normal_quantile",
    "gaussian_kernel_1d",
    "gaussian_kernel_2d",
    "soft_threshold",
]

_INV_E = math.exp(-1.0)


@dataclass(frozen=True)
class KernelParams:
    """Bandwidth of the isotropic Gaussian kernel, in unit-square coordinates."""

    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"kernel bandwidth must be positive, got {self.h}")


def lambert_w0(z, max_iter=50):
    """Principal branch of the Lambert W function for real ``z >= -1/e``.

    The starting point is the branch-point series near ``-1/e``, ``log1p(z)``
    for moderate ``z`` and the two-term asymptotic expansion for large ``z``;
    it is then polished with Halley's iteration.

    Parameters
    ----------
    z : float
        Argument, must satisfy ``z >= -1/e``.
    max_iter : int
        Cap on Halley steps.

    Returns
    -------
    float
        ``w >= -1`` with ``w * exp(w) == z``.
    """
    z = float(z)
    if math.isnan(z):
        raise ValueError("lambert_w0 of NaN")
    if z < -_INV_E:
        # -1/e itself is not representable; allow one rounding step below it
        if z < -_INV_E - 4 * np.finfo(float).eps:
            raise ValueError(f"lambert_w0 domain error: z={z!r} < -1/e")
        return -1.0
    if z == 0.0:
        return 0.0
    if math.isinf(z):
        return math.inf

    if z < -0.25:
        p = math.sqrt(max(2.0 * (math.e * z + 1.0), 0.0))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
    elif z < 3.0:
        w = math.log1p(z)
    else:
        l1 = math.log(z)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1

    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - z
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        if denom == 0.0:
            break
        step = f / denom
        w -= step
        if abs(step) <= 4 * np.finfo(float).eps * (1.0 + abs(w)):
            break
    return max(w, -1.0)


def normal_cdf(x):
    """Standard normal CDF (Cephes ``ndtr``, erf/erfc based; accepts arrays)."""
    out = ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def normal_quantile(p):
    """Inverse of :func:`normal_cdf` on ``(0, 1)``.

    Raises ``ValueError`` outside the open interval; a probability of exactly
    0 or 1 usually means a false-positive rate was set to a degenerate value.
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any(~((p_arr > 0.0) & (p_arr < 1.0))):
        raise ValueError(f"normal_quantile needs 0 < p < 1, got {p}")
    out = ndtri(p_arr)
    return float(out) if out.ndim == 0 else out


def gaussian_kernel_1d(d, h):
    """One-axis factor ``exp(-d^2 / 2h^2) / (sqrt(2 pi) h)``.

    The product of two of these over the coordinates is exactly the 2-D
    kernel, which is what the tensor-product field updates rely on.
    """
    d = np.asarray(d, dtype=float)
    return np.exp(-(d * d) / (2.0 * h * h)) / (math.sqrt(2.0 * math.pi) * h)


def gaussian_kernel_2d(r, r2, params):
    """Normalized 2-D Gaussian kernel ``exp(-|r-r2|^2 / 2h^2) / (2 pi h^2)``.

    ``r`` and ``r2`` broadcast against each other along the leading axes;
    the last axis holds the two coordinates. ``params`` is a
    :class:`KernelParams` or a bare bandwidth.
    """
    h = params.h if isinstance(params, KernelParams) else float(params)
    diff = np.asarray(r, dtype=float) - np.asarray(r2, dtype=float)
    sq = np.sum(diff * diff, axis=-1)
    out = np.exp(-sq / (2.0 * h * h)) / (2.0 * math.pi * h * h)
    return float(out) if np.ndim(out) == 0 else out


def soft_threshold(x, t):
    """``sgn(x) * max(|x| - t, 0)``, the proximal map of ``t * |x|_1``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
