"""Adaptive kernelized max-min distance point selection on an m x m grid.

The selection criterion is ``psi(r) * f(r)**lam`` where ``psi`` is a
Gaussian mixture centred on the sampled points (weights = anomaly
probabilities) plus a uniform floor ``u``, and ``f`` is the distance to the
nearest sampled point. Both fields live on the grid and are updated in
O(m^2) per new sample.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .mathutil import gaussian_kernel_1d, lambert_w0

__all__ = [
    "GridSpec",
    "SamplerParams",
    "SamplerState",
    "SamplerExhausted",
    "NoRingError",
    "DegenerateThresholdError",
    "ParamWarning",
    "init_maximin",
    "ingest_sample",
    "next_point",
    "update_probabilities",
    "ring_radius",
    "exploration_threshold",
    "trap_index",
    "validate_params",
    "AKM2DSampler",
]


_INV_E = math.exp(-1.0)


class SamplerExhausted(RuntimeError):
    """Every grid cell has already been sampled."""


class NoRingError(ValueError):
    """The uniform weight is too large for a local maximum ring to exist."""


class DegenerateThresholdError(ValueError):
    """Ring radius does not exceed ``h * sqrt(lam)``; threshold undefined."""


@dataclass(frozen=True)
class GridSpec:
    """The sampling grid ``{(i/m, j/m) : i, j = 1..m}``.

    Cells are addressed by zero-based ``(i, j)`` with coordinate
    ``((i + 1) / m, (j + 1) / m)``, or by the row-major flat index
    ``i * m + j``.
    """

    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"grid resolution must be an integer >= 2, got {self.m}")

    @property
    def size(self):
        return self.m * self.m

    @property
    def axis(self):
        return np.arange(1, self.m + 1) / self.m

    def unflat(self, idx):
        return divmod(int(idx), self.m)

    def flat(self, i, j):
        return int(i) * self.m + int(j)

    def coords(self, idx):
        """Coordinates of flat index (or array of indices) as ``(..., 2)``."""
        i, j = np.divmod(np.asarray(idx), self.m)
        return np.stack([(i + 1) / self.m, (j + 1) / self.m], axis=-1)

    def nearest(self, x, y):
        """Flat index of the cell nearest to ``(x, y)``; ties go to the lower index."""
        i = min(max(math.ceil(x * self.m - 0.5) - 1, 0), self.m - 1)
        j = min(max(math.ceil(y * self.m - 0.5) - 1, 0), self.m - 1)
        return self.flat(i, j)


@dataclass(frozen=True)
class SamplerParams:
    """Tuning of the selection criterion.

    ``lam`` is the exploration exponent, ``u`` the uniform mixture weight and
    ``h`` the bandwidth of the anomaly mixture.
    """

    h: float = 0.02
    lam: float = 5.0
    u: float = 1e-9
    n_init: int = 10

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if not self.lam >= 1:
            raise ValueError(f"lam must be >= 1, got {self.lam}")
        if not self.u > 0:
            raise ValueError(f"u must be positive, got {self.u}")
        if int(self.n_init) != self.n_init or self.n_init < 1:
            raise ValueError(f"n_init must be a positive integer, got {self.n_init}")


@dataclass
class SamplerState:
    """Recursive fields of the sampler.

    ``d2`` holds squared distances to the nearest sample in grid units
    (integers stored as floats, hence exact), so ``f = sqrt(d2) / m``.
    ``psi`` is the unnormalized mixture ``Kx^T P_A Ky + u``.
    """

    grid: GridSpec
    params: SamplerParams
    kx: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    d2: np.ndarray = field(repr=False)
    pa: np.ndarray = field(repr=False)
    samples: list = field(default_factory=list)

    @classmethod
    def empty(cls, grid, params):
        m = grid.m
        offs = np.arange(m)
        diff = (offs[:, None] - offs[None, :]) / m
        kx = gaussian_kernel_1d(diff, params.h)
        return cls(
            grid=grid,
            params=params,
            kx=kx,
            psi=np.full((m, m), float(params.u)),
            d2=np.full((m, m), np.inf),
            pa=np.zeros((m, m)),
        )

    @property
    def ky(self):
        # same axis resolution and bandwidth on both axes
        return self.kx

    @property
    def f(self):
        return np.sqrt(self.d2) / self.grid.m

    @property
    def n(self):
        return len(self.samples)

    @property
    def sampled(self):
        return self.d2 == 0

    def mmd(self):
        return math.sqrt(float(self.d2.max())) / self.grid.m

    def criterion(self):
        """``log psi + lam * log f`` on the grid (``-inf`` at sampled cells)."""
        with np.errstate(divide="ignore"):
            return np.log(self.psi) + 0.5 * self.params.lam * (np.log(self.d2) - 2 * math.log(self.grid.m))


def _d2_update(d2, grid, idx):
    i, j = grid.unflat(idx)
    offs = np.arange(grid.m, dtype=float)
    di = (offs - i) ** 2
    dj = (offs - j) ** 2
    np.minimum(d2, di[:, None] + dj[None, :], out=d2)


def ingest_sample(state, idx, p_a=0.0):
    """Add sampled cell ``idx`` with anomaly probability ``p_a`` (in place).

    Updates the distance field by the recursive min rule and adds the
    rank-one contribution ``p_a * outer(Kx[i], Ky[j])`` to ``psi``.
    Returns ``state`` for chaining.
    """
    idx = int(idx)
    if not 0 <= idx < state.grid.size:
        raise IndexError(f"cell index {idx} outside grid of {state.grid.size} cells")
    if not 0.0 <= p_a <= 1.0:
        raise ValueError(f"p_a must lie in [0, 1], got {p_a}")
    i, j = state.grid.unflat(idx)
    if state.d2[i, j] == 0:
        raise ValueError(f"cell {idx} ({i}, {j}) was already sampled")
    _d2_update(state.d2, state.grid, idx)
    state.samples.append(idx)
    if p_a:
        state.pa[i, j] = p_a
        state.psi += p_a * np.outer(state.kx[i], state.ky[j])
    return state


def update_probabilities(state, idx, p_a):
    """Reset the anomaly probabilities of already-sampled cells.

    Few changes are applied as rank-one corrections; otherwise ``psi`` is
    rebuilt from the sampled rows and columns of the kernel matrices.
    """
    idx = np.atleast_1d(np.asarray(idx, dtype=int))
    p_a = np.broadcast_to(np.asarray(p_a, dtype=float), idx.shape)
    if np.any((p_a < 0) | (p_a > 1)):
        raise ValueError("p_a must lie in [0, 1]")
    ii, jj = np.divmod(idx, state.grid.m)
    if np.any(state.d2[ii, jj] != 0):
        raise ValueError("probabilities can only be set on sampled cells")
    if len(idx) <= 4:
        for i, j, p in zip(ii, jj, p_a):
            delta = p - state.pa[i, j]
            if delta:
                state.pa[i, j] = p
                state.psi += delta * np.outer(state.kx[i], state.ky[j])
        return state
    state.pa[ii, jj] = p_a
    rebuild_psi(state)
    return state


def rebuild_psi(state):
    """Recompute ``psi = Kx^T P_A Ky + u`` from the stored probabilities."""
    s = np.asarray(state.samples, dtype=int)
    if s.size == 0:
        state.psi = np.full_like(state.psi, state.params.u)
        return state
    ii, jj = np.divmod(s, state.grid.m)
    w = state.pa[ii, jj]
    keep = w != 0
    ii, jj, w = ii[keep], jj[keep], w[keep]
    state.psi = state.kx[ii].T @ (w[:, None] * state.ky[jj]) + state.params.u
    return state


def next_point(state, flat=False):
    """Flat index of the grid cell maximizing ``psi * f**lam``.

    With ``flat=True`` the mixture is ignored (``psi == 1``), which is the
    greedy max-min distance design. Ties go to the smallest row-major index.
    """
    if state.n == 0:
        raise ValueError("next_point needs at least one ingested sample")
    if state.n >= state.grid.size:
        raise SamplerExhausted("all grid cells have been sampled")
    score = state.d2 if flat else state.criterion()
    return int(np.argmax(score))


def init_maximin(grid, n_init):
    """Greedy max-min distance design seeded at the cell nearest the centre.

    Deterministic: every argmax tie goes to the smallest row-major index.
    """
    if n_init < 1:
        raise ValueError(f"n_init must be >= 1, got {n_init}")
    if n_init > grid.size:
        raise ValueError(f"n_init={n_init} exceeds the {grid.size} grid cells")
    axis = grid.axis
    dist = (axis[:, None] - 0.5) ** 2 + (axis[None, :] - 0.5) ** 2
    first = int(np.argmin(dist))
    d2 = np.full((grid.m, grid.m), np.inf)
    pts = [first]
    _d2_update(d2, grid, first)
    while len(pts) < n_init:
        nxt = int(np.argmax(d2))
        pts.append(nxt)
        _d2_update(d2, grid, nxt)
    return pts


def ring_radius(params, p_a):
    """Distance from an isolated anomalous sample at which the criterion peaks.

    ``d = h * sqrt(lam - 2 W0(-(pi h^2 lam u / p_a) exp(lam / 2)))``.
    Raises :class:`NoRingError` when the Lambert argument is below ``-1/e``.
    """
    if not p_a > 0:
        raise ValueError(f"p_a must be positive, got {p_a}")
    w = _ring_w(params, p_a)
    return params.h * math.sqrt(params.lam - 2.0 * w)


def _ring_w(params, p_a):
    h, lam, u = params.h, params.lam, params.u
    # exp(lam/2) may overflow for large lam; combine in log space
    log_mag = math.log(math.pi * lam) + 2.0 * math.log(h) + math.log(u) - math.log(p_a) + lam / 2.0
    arg = -math.exp(log_mag) if log_mag < 700 else -math.inf
    if arg < -_INV_E:
        raise NoRingError(
            f"no local maximum ring: Lambert argument {arg:.3g} < -1/e (u={u:g} too large for p_a={p_a:g})"
        )
    return lambert_w0(arg)


def exploration_threshold(params, p_a, c):
    """Max-min distance below which the anomaly ring is the global maximum.

    Returns ``(1/(1+exp(-c^2)) * d^2 / (2 (d^2 - lam h^2)))**(1/lam) * d`` with
    ``d`` the ring radius. ``d^2 - lam h^2`` is evaluated as ``-2 h^2 W``
    to avoid cancellation when ``u`` is tiny.
    """
    if not c > 0:
        raise ValueError(f"c must be positive, got {c}")
    w = _ring_w(params, p_a)
    h, lam = params.h, params.lam
    d2 = h * h * (lam - 2.0 * w)
    excess = -2.0 * h * h * w
    if not excess > 0:
        raise DegenerateThresholdError(
            "ring radius equals h*sqrt(lam) (u is zero or underflows); threshold is unbounded"
        )
    factor = 1.0 / (1.0 + math.exp(-c * c))
    log_ratio = math.log(factor) + math.log(d2) - math.log(2.0 * excess)
    return math.exp(log_ratio / lam) * math.sqrt(d2)


def trap_index(params):
    """Left side of the no-trap rule ``(4 pi u e^{lam/2})^{-1/lam} h sqrt(lam) < 1``."""
    h, lam, u = params.h, params.lam, params.u
    return math.exp(-(math.log(4 * math.pi * u) + lam / 2.0) / lam) * h * math.sqrt(lam)


@dataclass(frozen=True)
class ParamWarning:
    code: str
    message: str


def validate_params(params):
    """Advisory checks on sampler tuning; returns a list of :class:`ParamWarning`.

    An empty list means no concerns. Codes: ``trap`` (the no-trap rule
    fails), ``lam_small`` (``lam < 5``), ``u_large`` (``u >= 1e-7``).
    """
    out = []
    t = trap_index(params)
    if t >= 1:
        out.append(
            ParamWarning(
                "trap",
                f"(4 pi u e^(lam/2))^(-1/lam) h sqrt(lam) = {t:.4g} >= 1: sampling may stay "
                "around anomalies and stop exploring; raise u or lam, or lower h",
            )
        )
    if params.lam < 5:
        out.append(ParamWarning("lam_small", f"lam = {params.lam:g} < 5: exploitation rings may not form"))
    if params.u >= 1e-7:
        out.append(
            ParamWarning("u_large", f"u = {params.u:g} >= 1e-7: max-min distance has been seen to stall")
        )
    return out


class AKM2DSampler:
    """Stateful adaptive sampler with the interface shared by the benchmarks.

    ``flat=True`` drops the mixture, i.e. plain greedy max-min distance.
    """

    name = "akm2d"
    uses_probabilities = True

    def __init__(self, grid, params=None, flat=False):
        self.grid = grid
        self.params = params or SamplerParams()
        self.flat = flat
        self.state = SamplerState.empty(grid, self.params)

    def initial_design(self, n_init):
        return init_maximin(self.grid, n_init)

    def next_point(self, measurements=None):
        return next_point(self.state, flat=self.flat)

    def ingest(self, idx, p_a=0.0):
        ingest_sample(self.state, idx, 0.0 if self.flat else p_a)

    def set_probabilities(self, idx, p_a):
        if not self.flat:
            update_probabilities(self.state, idx, p_a)
