"""Comparison samplers: random, multi-resolution grid, max-min DOE and GP variance.

All share the interface of :class:`akm2d.sampler.AKM2DSampler`:
``initial_design``, ``next_point``, ``ingest`` and ``set_probabilities``.
"""

import math
from collections import deque

import numpy as np

from .sampler import AKM2DSampler, SamplerExhausted, SamplerParams, init_maximin, next_point

__all__ = [
    "RandomSampler",
    "GridSampler",
    "DOESampler",
    "VarianceSampler",
    "random_next",
    "grid_next",
    "doe_next",
    "variance_next",
    "make_sampler",
    "SAMPLER_KINDS",
]

SAMPLER_KINDS = ("akm2d", "random", "grid", "doe", "variance")


def random_next(sampled, rng):
    """Uniform draw among unsampled cells of the boolean mask ``sampled``."""
    free = np.flatnonzero(~np.asarray(sampled, dtype=bool).ravel())
    if free.size == 0:
        raise SamplerExhausted("all grid cells have been sampled")
    return int(free[rng.integers(free.size)])


class RandomSampler:
    name = "random"
    uses_probabilities = False

    def __init__(self, grid, rng=None):
        self.grid = grid
        self.rng = rng if rng is not None else np.random.default_rng()
        self.sampled = np.zeros((grid.m, grid.m), dtype=bool)

    def initial_design(self, n_init):
        pts = []
        for _ in range(n_init):
            idx = random_next(self.sampled, self.rng)
            self.sampled.flat[idx] = True
            pts.append(idx)
        self.sampled[:] = False
        return pts

    def next_point(self, measurements=None):
        return random_next(self.sampled, self.rng)

    def ingest(self, idx, p_a=0.0):
        if self.sampled.flat[idx]:
            raise ValueError(f"cell {idx} was already sampled")
        self.sampled.flat[idx] = True

    def set_probabilities(self, idx, p_a):
        pass


class GridSampler:
    """Coarse lattice first, then 5x-refined lattices inside triggered coarse cells.

    The coarse lattice sits at ``(a/(c+1), b/(c+1))``, ``a, b = 1..c``, snapped to
    the nearest grid cell and visited in raster order. A coarse cell is
    triggered when any sample that falls in it has ``p_a > trigger``;
    triggered cells are refined first-in first-out. When both queues are
    empty the sampler falls back to uniform random choice.
    """

    name = "grid"
    uses_probabilities = True

    def __init__(self, grid, coarse=15, refine=5, trigger=0.5, rng=None):
        if coarse < 1 or refine < 2:
            raise ValueError("coarse must be >= 1 and refine >= 2")
        self.grid = grid
        self.coarse = coarse
        self.refine = refine
        self.trigger = trigger
        self.rng = rng if rng is not None else np.random.default_rng()
        self.spacing = 1.0 / (coarse + 1)
        self.sampled = np.zeros((grid.m, grid.m), dtype=bool)
        self.samples = []
        self.pa = {}
        self.coarse_queue = deque(self._coarse_points())
        self.triggered = set()
        self.fine_queue = deque()

    def _coarse_points(self):
        out = []
        for a in range(1, self.coarse + 1):
            for b in range(1, self.coarse + 1):
                idx = self.grid.nearest(a * self.spacing, b * self.spacing)
                if idx not in out:
                    out.append(idx)
        return out

    def coarse_cell(self, idx):
        x, y = self.grid.coords(idx)
        a = min(max(int(math.floor(x / self.spacing + 0.5)), 1), self.coarse)
        b = min(max(int(math.floor(y / self.spacing + 0.5)), 1), self.coarse)
        return a, b

    def fine_points(self, cell):
        a, b = cell
        step = self.spacing / self.refine
        half = self.refine // 2
        offs = [k - half for k in range(self.refine)]
        out = []
        for da in offs:
            for db in offs:
                idx = self.grid.nearest(a * self.spacing + da * step, b * self.spacing + db * step)
                if idx not in out:
                    out.append(idx)
        return out

    def initial_design(self, n_init):
        return list(self.coarse_queue)[:n_init]

    def next_point(self, measurements=None):
        return grid_next(self)

    def ingest(self, idx, p_a=0.0):
        if self.sampled.flat[idx]:
            raise ValueError(f"cell {idx} was already sampled")
        self.sampled.flat[idx] = True
        self.samples.append(int(idx))
        self.pa[int(idx)] = p_a

    def set_probabilities(self, idx, p_a):
        for i, p in zip(np.atleast_1d(idx), np.broadcast_to(p_a, np.shape(np.atleast_1d(idx)))):
            self.pa[int(i)] = float(p)


def grid_next(state):
    """Next cell of the multi-resolution grid design held in ``state``."""
    for idx in state.samples:
        if state.pa.get(idx, 0.0) > state.trigger:
            cell = state.coarse_cell(idx)
            if cell not in state.triggered:
                state.triggered.add(cell)
                state.fine_queue.extend(state.fine_points(cell))
    for queue in (state.coarse_queue, state.fine_queue):
        while queue:
            idx = queue[0]
            if state.sampled.flat[idx]:
                queue.popleft()
                continue
            return int(idx)
    return random_next(state.sampled, state.rng)


class DOESampler(AKM2DSampler):
    """Greedy max-min distance design (the adaptive sampler with a flat mixture)."""

    name = "doe"
    uses_probabilities = False

    def __init__(self, grid, params=None):
        super().__init__(grid, params or SamplerParams(), flat=True)


def doe_next(state):
    """Greedy max-min choice on a :class:`~akm2d.sampler.SamplerState`."""
    return next_point(state, flat=True)


class VarianceSampler:
    """Pick the unsampled cell with the largest GP posterior variance.

    Covariance ``exp(-|r - r'|^2 / (2 h_gp^2))`` with a nugget on the
    observations. The posterior variance over the grid is maintained by
    rank-one Cholesky updates, one row of ``L^{-1} K_*`` per new sample.
    """

    name = "variance"
    uses_probabilities = False

    def __init__(self, grid, h_gp=0.1, nugget=1e-4, max_bumps=3):
        self.grid = grid
        self.h_gp = h_gp
        self.nugget = nugget
        self.max_bumps = max_bumps
        self.samples = []
        self.sampled = np.zeros(grid.size, dtype=bool)
        self._reset()

    def _reset(self):
        self.var = np.ones(self.grid.size)
        self.W = np.zeros((0, self.grid.size))

    def _cov_row(self, idx):
        i, j = self.grid.unflat(idx)
        axis = self.grid.axis
        gx = np.exp(-((axis - axis[i]) ** 2) / (2 * self.h_gp**2))
        gy = np.exp(-((axis - axis[j]) ** 2) / (2 * self.h_gp**2))
        return np.outer(gx, gy).ravel()

    def _append(self, idx):
        l = self.W[:, idx]
        piv = self.var[idx] + self.nugget
        if not piv > 1e-12:
            return False
        lnn = math.sqrt(piv)
        w = (self._cov_row(idx) - l @ self.W) / lnn
        self.W = np.vstack([self.W, w])
        self.var -= w * w
        np.maximum(self.var, 0.0, out=self.var)
        return True

    def initial_design(self, n_init):
        return init_maximin(self.grid, n_init)

    def next_point(self, measurements=None):
        return variance_next(self, measurements)

    def ingest(self, idx, p_a=0.0):
        idx = int(idx)
        if self.sampled[idx]:
            raise ValueError(f"cell {idx} was already sampled")
        self.sampled[idx] = True
        self.samples.append(idx)
        bumps = 0
        while not self._append(idx):
            bumps += 1
            if bumps > self.max_bumps:
                raise np.linalg.LinAlgError("GP covariance stays ill-conditioned after raising the nugget")
            self.nugget = self.nugget * 10.0 if self.nugget > 0 else 1e-10
            self._reset()
            for k in self.samples[:-1]:
                self._append(k)

    def set_probabilities(self, idx, p_a):
        pass


def variance_next(state, measurements=None):
    """Argmax of the GP posterior variance over unsampled cells.

    The variance does not depend on the measured values, so
    ``measurements`` is accepted for interface symmetry only.
    """
    if state.sampled.all():
        raise SamplerExhausted("all grid cells have been sampled")
    v = np.where(state.sampled, -np.inf, state.var)
    return int(np.argmax(v))


def make_sampler(kind, grid, params=None, rng=None, coarse=15, refine=5, trigger=0.5,
                 h_gp=0.1, nugget=1e-4):
    """Build a sampler by name (one of :data:`SAMPLER_KINDS`)."""
    if kind == "akm2d":
        return AKM2DSampler(grid, params)
    if kind == "doe":
        return DOESampler(grid, params)
    if kind == "random":
        return RandomSampler(grid, rng)
    if kind == "grid":
        return GridSampler(grid, coarse=coarse, refine=refine, trigger=trigger, rng=rng)
    if kind == "variance":
        return VarianceSampler(grid, h_gp=h_gp, nugget=nugget)
    raise ValueError(f"unknown sampler kind {kind!r}; expected one of {SAMPLER_KINDS}")
