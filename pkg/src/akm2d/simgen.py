"""Synthetic phantoms: smooth mean + clustered anomalies + white noise."""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

__all__ = [
    "Phantom",
    "bspline_basis",
    "generate_phantom",
    "generate_disk_phantom",
    "mean_field",
    "write_pgm",
    "read_pgm",
    "write_field_csv",
]


@dataclass
class Phantom:
    """Ground-truth fields on the ``m x m`` grid; ``Y = M + A + E``."""

    M: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    E: np.ndarray = field(repr=False)
    true_region: np.ndarray = field(repr=False)
    seed: int
    delta: float
    sigma: float
    region_eps: float
    meta: dict = field(default_factory=dict)

    @property
    def Y(self):
        return self.M + self.A + self.E

    @property
    def m(self):
        return self.M.shape[0]


def bspline_basis(m, n_basis=13, degree=3):
    """``(m, n_basis)`` clamped uniform B-spline basis at ``x_i = i / (m + 1)``.

    Rows sum to one (partition of unity) and entries are nonnegative.
    """
    n_inner = n_basis - degree - 1
    if n_inner < 0:
        raise ValueError(f"need at least {degree + 1} basis functions, got {n_basis}")
    knots = np.r_[np.zeros(degree), np.linspace(0.0, 1.0, n_inner + 2), np.ones(degree)]
    x = np.arange(1, m + 1) / (m + 1)
    return BSpline.design_matrix(x, knots, degree).toarray()


def mean_field(m):
    """``M(x, y) = exp(-(x^2 + y^2) / 4)`` at ``x = i / (m + 1)``, ``y = j / (m + 1)``."""
    x = np.arange(1, m + 1) / (m + 1)
    return np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / 4.0)


def generate_phantom(m=200, n_clusters=7, delta=0.3, sigma=0.05, seed=0, n_basis=13, region_eps=None):
    """Anomalies ``A = B A_s B^T`` with ``delta`` at ``n_clusters`` random entries of ``A_s``.

    ``region_eps`` defaults to ``delta / 4``: the true region is the part of
    each B-spline bump above a quarter of the intensity.
    """
    if m < 50:
        raise ValueError(f"phantom resolution must be >= 50, got {m}")
    if not 0 <= n_clusters <= n_basis * n_basis:
        raise ValueError(f"n_clusters must be in [0, {n_basis * n_basis}], got {n_clusters}")
    eps = delta / 4.0 if region_eps is None else float(region_eps)
    rng = np.random.default_rng(seed)
    picks = rng.choice(n_basis * n_basis, size=n_clusters, replace=False)
    As = np.zeros(n_basis * n_basis)
    As[picks] = delta
    B = bspline_basis(m, n_basis)
    A = B @ As.reshape(n_basis, n_basis) @ B.T
    E = rng.standard_normal((m, m)) * sigma
    M = mean_field(m)
    meta = {
        "kind": "bspline",
        "n_basis": n_basis,
        "basis": "clamped cubic, uniform knots, n_basis functions",
        "clusters": sorted(int(p) for p in picks),
    }
    return Phantom(M, A, E, A > eps, int(seed), float(delta), float(sigma), eps, meta)


def generate_disk_phantom(m=200, radius=0.0311, center=(0.5, 0.5), delta=0.3, sigma=0.05, seed=0):
    """Single flat disk anomaly of height ``delta`` on the smooth mean."""
    rng = np.random.default_rng(seed)
    axis = np.arange(1, m + 1) / m
    inside = (axis[:, None] - center[0]) ** 2 + (axis[None, :] - center[1]) ** 2 <= radius * radius
    A = np.where(inside, float(delta), 0.0)
    E = rng.standard_normal((m, m)) * sigma
    M = mean_field(m)
    meta = {"kind": "disk", "radius": radius, "center": list(center)}
    return Phantom(M, A, E, inside & (delta > 0), int(seed), float(delta), float(sigma), 0.0, meta)


def write_pgm(path, field_, comment=None):
    """Write a 2-D array as a 16-bit binary PGM, min-max scaled to 0..65535.

    The affine map back to field units is recorded in a header comment:
    ``value = lo + pixel * (hi - lo) / 65535``.
    """
    arr = np.asarray(field_, dtype=float)
    lo, hi = float(arr.min()), float(arr.max())
    scale = (hi - lo) / 65535.0 if hi > lo else 0.0
    pix = np.zeros(arr.shape, dtype=">u2") if scale == 0 else np.rint((arr - lo) / scale).astype(">u2")
    lines = [b"P5", f"# affine: value = {lo!r} + pixel * {scale!r}".encode()]
    if comment:
        lines += [f"# {c}".encode() for c in str(comment).splitlines()]
    lines += [f"{arr.shape[1]} {arr.shape[0]}".encode(), b"65535"]
    with open(path, "wb") as fh:
        fh.write(b"\n".join(lines) + b"\n")
        fh.write(pix.tobytes())


def read_pgm(path):
    """Read a 16-bit PGM written by :func:`write_pgm`, undoing the affine map."""
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0
    tokens, comments = [], []
    while len(tokens) < 4:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode()
        pos = end + 1
        if line.startswith("#"):
            comments.append(line[1:].strip())
        else:
            tokens += line.split()
    if tokens[0] != "P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pix = np.frombuffer(data, dtype=">u2", count=w * h, offset=pos).reshape(h, w)
    lo, scale = 0.0, 1.0
    for c in comments:
        if c.startswith("affine:"):
            rhs = c.split("=", 1)[1]
            lo_s, scale_s = rhs.split("+ pixel *")
            lo, scale = float(lo_s), float(scale_s)
    return lo + pix.astype(float) * scale


def write_field_csv(path, field_):
    """Raw values as CSV rows ``i,j,value`` (zero-based grid indices)."""
    arr = np.asarray(field_, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "value"])
        for (i, j), v in np.ndenumerate(arr):
            w.writerow([i, j, repr(float(v))])
