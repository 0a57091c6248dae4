"""Simulation loop: sampler -> robust mean -> sparse anomaly -> metrics.

One run measures the phantom one cell at a time. After each measurement
the mean is refitted, the anomaly probabilities are pushed back to the
sampler, the anomaly expansion is refitted and the detected region is
scored against the truth.
"""

import csv
import dataclasses
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from .anomaly import fit_anomaly, update_anomaly_bandwidth
from .benchmarks import SAMPLER_KINDS, make_sampler
from .estimation import MeanTracker, RobustFitParams
from .metrics import detection_metrics
from .sampler import GridSpec, SamplerParams, trap_index, validate_params
from .simgen import generate_disk_phantom, generate_phantom, write_pgm

logger = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RunResult",
    "load_config",
    "make_phantom",
    "run_single",
    "run_replicated",
    "run_sensitivity",
    "ITERATION_COLUMNS",
    "ITERATION_SCHEMA",
]

ITERATION_COLUMNS = ("n", "precision", "recall", "f", "er", "ammd", "mmd",
                     "s_hat", "gamma_a", "h_a", "wall_ms", "warn")
ITERATION_SCHEMA = "# akm2d iteration log v1"
POINTS_COLUMNS = ("n", "i", "j", "x", "y", "z", "p_a")
OUTPUT_ENV = "AKM2D_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _floats(text):
    return tuple(float(t) for t in str(text).replace(",", " ").split())


def _ints(text):
    return tuple(int(float(t)) for t in str(text).replace(",", " ").split())


@dataclass
class ExperimentConfig:
    """All knobs of a simulation run; see ``load_config`` for the file format."""

    # phantom
    phantom: str = "bspline"
    m: int = 200
    n_clusters: int = 7
    delta: float = 0.3
    sigma: float = 0.05
    region_eps: float = None
    disk_radius: float = 0.0311
    # sampler
    sampler: str = "akm2d"
    # tuned on the default phantom; SamplerParams keeps the textbook defaults
    h: float = 0.02
    lam: float = 3.0
    u: float = 30.0
    n_init: int = 10
    grid_coarse: int = 15
    grid_refine: int = 5
    grid_trigger: float = 0.5
    h_gp: float = 0.1
    nugget: float = 1e-4
    # estimation
    h_mu: float = 0.5  # 0.2 nearly interpolates the noise at small n
    lambda_s: float = None
    alpha0: float = 0.05
    # anomaly
    anomaly_fit: bool = True
    alpha: float = 0.05
    gamma_mode: str = "closed_form"
    two_sided: bool = False
    c_h: float = 0.2
    h_a_init: float = 0.02
    h_a_min: float = 0.02
    # run
    n_max: int = 250
    n_replications: int = 1
    seed: int = 0
    workers: int = 1
    checkpoints: tuple = (250, 400)
    snapshot_every: int = 0
    output_dir: str = "akm2d_out"
    # sensitivity sweep
    sens_h: tuple = (0.015, 0.02, 0.03)
    sens_lam: tuple = (20.0, 10.0, 6.7, 5.0)
    sens_u: tuple = (1e-13, 1e-11, 1e-9, 1e-7)
    sens_radius: tuple = (0.0311, 0.0517, 0.0747)
    stall_ratio: float = 0.9

    def sampler_params(self):
        return SamplerParams(h=self.h, lam=self.lam, u=self.u, n_init=self.n_init)

    def validate(self):
        """Raise :class:`ConfigError` on violated invariants."""
        if self.phantom not in ("bspline", "disk"):
            raise ConfigError(f"phantom must be 'bspline' or 'disk', got {self.phantom!r}")
        if self.sampler not in SAMPLER_KINDS:
            raise ConfigError(f"sampler must be one of {SAMPLER_KINDS}, got {self.sampler!r}")
        if self.m < 2:
            raise ConfigError("m must be >= 2")
        if not 1 <= self.n_init <= self.n_max <= self.m * self.m:
            raise ConfigError(f"need 1 <= n_init <= n_max <= m^2, got n_init={self.n_init}, "
                              f"n_max={self.n_max}, m={self.m}")
        if self.n_replications < 1:
            raise ConfigError("n_replications must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.gamma_mode not in ("closed_form", "monte_carlo"):
            raise ConfigError(f"unknown gamma_mode {self.gamma_mode!r}")
        for name in ("alpha", "alpha0"):
            if not 0 < getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")
        try:
            self.sampler_params()
            RobustFitParams(h_mu=self.h_mu, lambda_s=self.lambda_s)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def to_text(self):
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            out.append(f"{f.name} = {v}")
        return "\n".join(out) + "\n"


_TYPES = {f.name: f for f in fields(ExperimentConfig)}


def _coerce(name, text):
    if name not in _TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    default = _TYPES[name].default
    text = str(text).strip()
    if text.lower() in ("none", "") and default is None:
        return None
    try:
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, tuple):
            return _ints(text) if name == "checkpoints" else _floats(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float) or default is None:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None


def load_config(path=None, overrides=None):
    """Read a ``key = value`` file (``#`` starts a comment) and apply overrides.

    ``overrides`` maps key names to strings or values and wins over the
    file. The output directory falls back to ``$AKM2D_OUTPUT_DIR`` when it
    is set in neither.
    """
    values = {}
    if path is not None:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, val = (s.strip() for s in line.split("=", 1))
                values[key] = _coerce(key, val)
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        values[key] = _coerce(key, val) if isinstance(val, str) else val
    if "output_dir" not in values and os.environ.get(OUTPUT_ENV):
        values["output_dir"] = os.environ[OUTPUT_ENV]
    return ExperimentConfig(**values).validate()


def make_phantom(config, seed=None):
    seed = config.seed if seed is None else seed
    if config.phantom == "disk":
        return generate_disk_phantom(config.m, radius=config.disk_radius, delta=config.delta,
                                     sigma=config.sigma, seed=seed)
    return generate_phantom(config.m, n_clusters=config.n_clusters, delta=config.delta,
                            sigma=config.sigma, seed=seed, region_eps=config.region_eps)


@dataclass
class RunResult:
    """Per-iteration rows plus the final state of one run."""

    config: ExperimentConfig
    seed: int
    rows: list = field(default_factory=list)
    idx: np.ndarray = None
    points: np.ndarray = None
    z: np.ndarray = None
    p_a: np.ndarray = None
    region: np.ndarray = None
    a_hat: np.ndarray = None
    true_region: np.ndarray = None

    def row_at(self, n):
        for row in self.rows:
            if row["n"] == n:
                return row
        raise KeyError(n)

    def column(self, name):
        return np.array([row[name] for row in self.rows])


def run_single(config, seed=None, write=False, out_dir=None):
    """Run one sequential experiment; optionally write its artifacts.

    Returns a :class:`RunResult` with one metrics row per sampled point.
    """
    seed = config.seed if seed is None else int(seed)
    for w in validate_params(config.sampler_params()) if config.sampler == "akm2d" else []:
        logger.warning("parameter advisory [%s]: %s", w.code, w.message)

    phantom = make_phantom(config, seed)
    Y = phantom.Y
    grid = GridSpec(config.m)
    rng = np.random.default_rng([seed, 1])
    sampler = make_sampler(config.sampler, grid, config.sampler_params(), rng=rng,
                           coarse=config.grid_coarse, refine=config.grid_refine,
                           trigger=config.grid_trigger, h_gp=config.h_gp, nugget=config.nugget)
    tracker = MeanTracker(RobustFitParams(h_mu=config.h_mu, lambda_s=config.lambda_s), alpha0=config.alpha0)
    true = phantom.true_region
    n_true = int(true.sum())
    axis = grid.axis
    dist2 = np.full((grid.m, grid.m), np.inf)

    initial = list(sampler.initial_design(config.n_init))
    idx = np.empty(config.n_max, dtype=np.int64)
    z = np.empty(config.n_max)
    pa_prev = np.zeros(config.n_max)
    hits = 0
    h_a = config.h_a_init
    theta = None
    region = np.zeros((grid.m, grid.m), dtype=bool)
    a_hat = np.zeros((grid.m, grid.m))
    gamma_a = math.nan
    p_a = np.zeros(0)
    result = RunResult(config=config, seed=seed, true_region=true)
    if write:
        out_dir = out_dir or config.output_dir
        os.makedirs(out_dir, exist_ok=True)

    for k in range(config.n_max):
        t0 = time.perf_counter()
        n = k + 1
        cell = initial[k] if k < len(initial) else sampler.next_point()
        sampler.ingest(cell, 0.0)
        i, j = divmod(int(cell), grid.m)
        idx[k] = cell
        z[k] = Y[i, j]
        hits += bool(true[i, j])
        np.minimum(dist2, (axis[:, None] - axis[i]) ** 2 + (axis[None, :] - axis[j]) ** 2, out=dist2)
        pts = grid.coords(idx[:n])

        mu, res, s_hat, p_a, warn = tracker.update(pts, z[:n])
        warns = [warn] if warn else []
        if sampler.uses_probabilities and n >= 2:
            changed = np.flatnonzero(p_a != pa_prev[:n])
            if changed.size:
                sampler.set_probabilities(idx[changed], p_a[changed])
            pa_prev[:n] = p_a

        if config.anomaly_fit and n >= config.n_init and s_hat > 0:
            th0 = None
            if theta is not None:
                th0 = np.zeros(n)
                th0[: len(theta)] = theta
            model = fit_anomaly(res, pts, s_hat, grid, h_a, alpha=config.alpha,
                                gamma_mode=config.gamma_mode, two_sided=config.two_sided,
                                theta0=th0, seed=seed)
            if not model.converged:
                warns.append("apg:max_iter")
            theta, region, a_hat, gamma_a = model.theta_a, model.region, model.a_hat_grid, model.gamma_a
            h_used = h_a
            h_a = update_anomaly_bandwidth(region, pts, grid, c_h=config.c_h,
                                           h_init=config.h_a_init, h_min=config.h_a_min)
        else:
            h_used = h_a

        prec, rec, fm = detection_metrics(region, true)
        wall_ms = (time.perf_counter() - t0) * 1e3
        result.rows.append({
            "n": n,
            "precision": prec,
            "recall": rec,
            "f": fm,
            "er": hits / n,
            "ammd": math.sqrt(dist2[true].max()) if n_true else 0.0,
            "mmd": math.sqrt(dist2.max()),
            "s_hat": s_hat,
            "gamma_a": gamma_a,
            "h_a": h_used,
            "wall_ms": wall_ms,
            "warn": ";".join(warns),
        })
        if write and config.snapshot_every and n % config.snapshot_every == 0:
            write_pgm(os.path.join(out_dir, f"region_{n:05d}.pgm"), region.astype(float))
            _write_points(os.path.join(out_dir, f"points_{n:05d}.csv"), grid, idx[:n], z[:n], p_a)

    result.idx = idx
    result.points = grid.coords(idx)
    result.z = z
    result.p_a = np.asarray(p_a)
    result.region = region
    result.a_hat = a_hat
    if write:
        write_run(result, out_dir)
    return result


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def iteration_csv(rows):
    buf = io.StringIO()
    buf.write(ITERATION_SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ITERATION_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in ITERATION_COLUMNS])
    return buf.getvalue()


def _write_points(path, grid, idx, z, p_a):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POINTS_COLUMNS)
        for n, (cell, zz, p) in enumerate(zip(idx, z, p_a), 1):
            i, j = divmod(int(cell), grid.m)
            x, y = grid.coords(int(cell))
            w.writerow([n, i, j, _fmt(x), _fmt(y), _fmt(zz), _fmt(p)])


def write_run(result, out_dir):
    """Iteration log, point list, final region and anomaly field, config echo."""
    grid = GridSpec(result.config.m)
    with open(os.path.join(out_dir, "iterations.csv"), "w", newline="") as fh:
        fh.write(iteration_csv(result.rows))
    _write_points(os.path.join(out_dir, "points.csv"), grid, result.idx, result.z, result.p_a)
    write_pgm(os.path.join(out_dir, "region.pgm"), result.region.astype(float), "final detected region")
    write_pgm(os.path.join(out_dir, "a_hat.pgm"), result.a_hat, "final anomaly field estimate")
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write(dataclasses.replace(result.config, seed=result.seed).to_text())


SUMMARY_METRICS = ("precision", "recall", "f", "er", "ammd", "mmd", "wall_ms")


def _replicate_one(args):
    config, seed, checkpoints = args
    try:
        res = run_single(config, seed=seed)
    except Exception as exc:  # noqa: BLE001 - a failed replication is counted, not fatal
        return seed, None, f"{type(exc).__name__}: {exc}"
    return seed, {c: res.row_at(c) for c in checkpoints}, None


def run_replicated(config, write=False, out_dir=None):
    """Replicate ``run_single`` over seeds ``seed + r`` and summarize checkpoints.

    Returns ``(summary_rows, per_rep)`` where each summary row holds the
    mean and sample standard deviation of one metric at one checkpoint over
    the successful replications, and ``per_rep`` maps seed to checkpoint
    rows (``None`` for failures).
    """
    checkpoints = tuple(c for c in config.checkpoints if c <= config.n_max) or (config.n_max,)
    jobs = [(config, config.seed + r, checkpoints) for r in range(config.n_replications)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as ex:
            outcomes = list(ex.map(_replicate_one, jobs))
    else:
        outcomes = [_replicate_one(j) for j in jobs]

    per_rep = {}
    n_failed = 0
    for seed, rows, err in outcomes:
        per_rep[seed] = rows
        if rows is None:
            n_failed += 1
            logger.error("replication seed=%d failed: %s", seed, err)
    ok = [rows for rows in per_rep.values() if rows is not None]
    summary = []
    for c in checkpoints:
        for metric in SUMMARY_METRICS:
            vals = np.array([rows[c][metric] for rows in ok], dtype=float)
            summary.append({
                "sampler": config.sampler,
                "checkpoint": c,
                "metric": metric,
                "mean": float(vals.mean()) if len(vals) else math.nan,
                "sd": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0 if len(vals) else math.nan,
                "n_ok": len(vals),
                "n_failed": n_failed,
            })
    if write:
        out_dir = out_dir or config.output_dir
        os.makedirs(out_dir, exist_ok=True)
        write_table(os.path.join(out_dir, f"summary_{config.sampler}.csv"), summary)
    return summary, per_rep


def write_table(path, rows, header=None):
    cols = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in cols])


def run_sensitivity(config, write=False, out_dir=None, early_n=None):
    """MMD and AMMD of the adaptive sampler over ``(h, lam, u)`` and disk radius.

    A cell is flagged as stalled when its final MMD is above
    ``stall_ratio`` times the MMD at ``early_n`` points (default a quarter
    of ``n_max``).
    """
    early_n = early_n or max(config.n_init, config.n_max // 4)
    rows = []
    for radius in config.sens_radius:
        for h in config.sens_h:
            for lam in config.sens_lam:
                for u in config.sens_u:
                    cfg = dataclasses.replace(config, phantom="disk", disk_radius=radius, sampler="akm2d",
                                              h=h, lam=lam, u=u, anomaly_fit=False)
                    res = run_single(cfg)
                    mmd = res.column("mmd")
                    rows.append({
                        "radius": radius,
                        "h": h,
                        "lam": lam,
                        "u": u,
                        "mmd": float(mmd[-1]),
                        "ammd": float(res.rows[-1]["ammd"]),
                        "trap_index": trap_index(cfg.sampler_params()),
                        "stalled": int(mmd[-1] > config.stall_ratio * mmd[early_n - 1]),
                    })
    if write:
        out_dir = out_dir or config.output_dir
        os.makedirs(out_dir, exist_ok=True)
        write_table(os.path.join(out_dir, "sensitivity.csv"), rows)
    return rows
