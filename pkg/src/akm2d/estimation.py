"""Robust kernel regression of the smooth mean and anomaly probabilities.

The mean at the sampled points is fitted by alternating a kernel-ridge
smoother with soft-thresholding of the residuals, which solves the
Huber-loss kernel regression through its sparse-outlier reformulation.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import erf

from .mathutil import normal_quantile, soft_threshold

logger = logging.getLogger(__name__)

__all__ = [
    "MeasurementSet",
    "RobustFitParams",
    "RobustFit",
    "kernel_matrix",
    "robust_fit",
    "estimate_noise",
    "anomaly_probability",
    "select_huber_gamma",
    "MeanTracker",
]

MAD_SCALE = 0.6745


@dataclass
class MeasurementSet:
    """Sampled locations with their measurements and current estimates."""

    points: np.ndarray
    z: np.ndarray
    mu_hat: np.ndarray = None
    residuals: np.ndarray = None
    s_hat: float = 0.0
    p_a: np.ndarray = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.z = np.asarray(self.z, dtype=float).ravel()
        n = len(self.z)
        if len(self.points) != n:
            raise ValueError(f"{len(self.points)} points but {n} measurements")
        for name in ("mu_hat", "residuals", "p_a"):
            val = getattr(self, name)
            if val is not None and len(val) != n:
                raise ValueError(f"{name} has length {len(val)}, expected {n}")
        if self.s_hat < 0:
            raise ValueError("s_hat must be nonnegative")

    def __len__(self):
        return len(self.z)


@dataclass(frozen=True)
class RobustFitParams:
    """Settings of the robust mean fit.

    ``None`` entries resolve to data-dependent defaults: ``lambda_s = 1e-3 n``,
    ``tol_mu = 1e-3 s_hat``. ``gamma`` is the Huber threshold (outliers are
    residuals beyond ``gamma / 2``); ``inf`` gives plain kernel ridge.
    """

    h_mu: float = 0.2
    lambda_s: float = None
    gamma: float = np.inf
    tol_mu: float = None
    max_iter: int = 200
    freeze_tol: float = None

    def __post_init__(self):
        if not self.h_mu > 0:
            raise ValueError("h_mu must be positive")
        if self.lambda_s is not None and not self.lambda_s > 0:
            raise ValueError("lambda_s must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class RobustFit:
    """Result of :func:`robust_fit`.

    ``coef`` are the dual weights, so the mean anywhere is
    ``sum_k K(r, r_k) coef_k`` (see :meth:`predict`).
    """

    mu: np.ndarray
    a: np.ndarray
    coef: np.ndarray
    points: np.ndarray = field(repr=False)
    h_mu: float
    n_iter: int
    converged: bool

    def predict(self, r):
        r = np.asarray(r, dtype=float).reshape(-1, 2)
        return kernel_matrix(r, self.h_mu, self.points) @ self.coef


def kernel_matrix(points, h, other=None):
    """Normalized Gaussian kernel matrix ``K[i, j] = K_h(points[i], other[j])``."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    q = p if other is None else np.asarray(other, dtype=float).reshape(-1, 2)
    sq = (
        np.sum(p * p, axis=1)[:, None]
        + np.sum(q * q, axis=1)[None, :]
        - 2.0 * p @ q.T
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * h * h)) / (2.0 * np.pi * h * h)


def robust_fit(points, z, params, a0=None, s_hat=None):
    """Huber kernel regression by alternating smoothing and soft-thresholding.

    Iterates ``mu = H (z - a)`` with ``H = K (K + lambda_s I)^{-1}`` and
    ``a = S(z - mu, gamma / 2)`` until the sup-norm change of ``mu`` drops
    below ``tol_mu``. Hitting ``max_iter`` returns the last iterate with
    ``converged=False``.

    Parameters
    ----------
    points : (n, 2) array
        Sampled locations.
    z : (n,) array
        Measurements.
    params : RobustFitParams
    a0 : (n,) array, optional
        Warm start for the outlier vector.
    s_hat : float, optional
        Noise scale used to resolve the default ``tol_mu``.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    z = np.asarray(z, dtype=float).ravel()
    n = len(z)
    if n < 2:
        raise ValueError("robust_fit needs at least 2 points")
    lam = params.lambda_s if params.lambda_s is not None else 1e-3 * n
    tol = params.tol_mu
    if tol is None:
        scale = s_hat if s_hat else estimate_noise(z - np.median(z))
        tol = 1e-3 * scale if scale > 0 else 1e-9
    K = kernel_matrix(points, params.h_mu)
    factor = cho_factor(K + lam * np.eye(n), lower=True, check_finite=False)
    thr = params.gamma / 2.0

    a = np.zeros(n) if a0 is None else np.asarray(a0, dtype=float).copy()
    coef = cho_solve(factor, z - a, check_finite=False)
    mu = K @ coef
    converged = False
    it = 0
    for it in range(1, params.max_iter + 1):
        a = soft_threshold(z - mu, thr)
        coef = cho_solve(factor, z - a, check_finite=False)
        mu_new = K @ coef
        change = np.max(np.abs(mu_new - mu))
        mu = mu_new
        if change < tol:
            converged = True
            break
    if not converged:
        logger.debug("robust_fit stopped at max_iter=%d (last change %.3g)", params.max_iter, change)
    a = soft_threshold(z - mu, thr)
    return RobustFit(mu=mu, a=a, coef=coef, points=points, h_mu=params.h_mu, n_iter=it, converged=converged)


def estimate_noise(residuals):
    """MAD scale ``median(|e|) / 0.6745``."""
    r = np.asarray(residuals, dtype=float)
    if r.size == 0:
        raise ValueError("estimate_noise needs at least one residual")
    return float(np.median(np.abs(r)) / MAD_SCALE)


def anomaly_probability(e, s_hat):
    """``2 Phi(|e| / s_hat) - 1``, evaluated as ``erf(|e| / (sqrt(2) s_hat))``.

    For ``s_hat == 0`` the limit is used: 1 for a nonzero residual, 0 for zero.
    """
    e = np.abs(np.asarray(e, dtype=float))
    if s_hat < 0:
        raise ValueError("s_hat must be nonnegative")
    if s_hat == 0:
        out = (e > 0).astype(float)
    else:
        out = erf(e / (np.sqrt(2.0) * s_hat))
    return float(out) if out.ndim == 0 else out


def select_huber_gamma(s_hat, alpha0):
    """Huber threshold giving false-positive rate ``alpha0`` on N(0, s_hat^2) noise."""
    if not 0 < alpha0 < 1:
        raise ValueError(f"alpha0 must lie in (0, 1), got {alpha0}")
    if not s_hat > 0:
        raise ValueError(f"s_hat must be positive, got {s_hat}")
    return 2.0 * s_hat * normal_quantile(1.0 - alpha0 / 2.0)


class MeanTracker:
    """Online mean estimation with the freeze/unfreeze rule.

    Each :meth:`update` refits the robust mean on all points, unless the
    mean has changed by less than ``freeze_tol`` (default ``1e-3 s_hat``) on
    two consecutive refits. While frozen, new points are predicted from the
    last fit; a new residual above ``3 gamma`` thaws the tracker.
    """

    def __init__(self, params=None, alpha0=0.05):
        self.params = params or RobustFitParams()
        self.alpha0 = alpha0
        self.fit = None
        self.s_hat = 0.0
        self.gamma = np.inf
        self.frozen = False
        self.n_refits = 0
        self._quiet = 0
        self._last_mu = None

    def update(self, points, z):
        """Return ``(mu_hat, residuals, s_hat, p_a, warn)`` for all points."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        z = np.asarray(z, dtype=float)
        n = len(z)
        warn = ""
        if n < 2:
            mu = z.copy()
            res = np.zeros(n)
            return mu, res, 0.0, np.zeros(n), warn

        if self.frozen and self.fit is not None:
            k_old = len(self.fit.mu)
            mu = np.concatenate([self.fit.mu, self.fit.predict(points[k_old:])])
            res = z - mu
            if np.any(np.abs(res[k_old:]) > 3 * self.gamma):
                self.frozen = False
                self._quiet = 0

        if not self.frozen or self.fit is None:
            mu, res, warn = self._refit(points, z)

        s = estimate_noise(res)
        self.s_hat = s
        if s > 0:
            self.gamma = select_huber_gamma(s, self.alpha0)
        return mu, res, s, anomaly_probability(res, s), warn

    def _refit(self, points, z):
        n = len(z)
        if not np.isfinite(self.gamma):
            # bootstrap the Huber threshold from a plain kernel-ridge fit
            pre = robust_fit(points, z, replace(self.params, gamma=np.inf, max_iter=1))
            s0 = estimate_noise(z - pre.mu)
            if s0 > 0:
                self.gamma = select_huber_gamma(s0, self.alpha0)
                self.s_hat = s0
        a0 = None
        if self.fit is not None:
            a0 = np.zeros(n)
            k = min(len(self.fit.a), n)
            a0[:k] = self.fit.a[:k]
        fit = robust_fit(points, z, replace(self.params, gamma=self.gamma), a0=a0, s_hat=self.s_hat)
        self.n_refits += 1
        freeze_tol = self.params.freeze_tol
        if freeze_tol is None:
            freeze_tol = 1e-3 * self.s_hat if self.s_hat > 0 else 0.0
        if self._last_mu is not None:
            k = len(self._last_mu)
            change = np.max(np.abs(fit.mu[:k] - self._last_mu))
            self._quiet = self._quiet + 1 if change < freeze_tol else 0
            if self._quiet >= 2:
                self.frozen = True
        self._last_mu = fit.mu
        self.fit = fit
        return fit.mu, z - fit.mu, "" if fit.converged else "robust_fit:max_iter"

