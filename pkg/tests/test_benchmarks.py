import numpy as np
import pytest
from scipy.stats import chisquare

from akm2d.benchmarks import (
    SAMPLER_KINDS,
    DOESampler,
    GridSampler,
    RandomSampler,
    VarianceSampler,
    make_sampler,
    random_next,
)
from akm2d.sampler import AKM2DSampler, GridSpec, SamplerExhausted, SamplerParams


def drive(sampler, n, p_a=0.0):
    out = []
    for _ in range(n):
        idx = sampler.next_point()
        sampler.ingest(idx, p_a)
        out.append(idx)
    return out


def gp_variance_oracle(grid, samples, h, nugget):
    """Posterior variance by a dense solve against the full covariance."""
    X = grid.coords(np.arange(grid.size))
    S = X[samples]
    k = lambda a, b: np.exp(-((a[:, None, :] - b[None, :, :]) ** 2).sum(-1) / (2 * h * h))
    Kss = k(S, S) + nugget * np.eye(len(S))
    Kxs = k(X, S)
    return 1.0 - np.einsum("ij,ji->i", Kxs, np.linalg.solve(Kss, Kxs.T))


# ---- random ---------------------------------------------------------------

def test_random_uniform_over_free_cells():
    g = GridSpec(10)
    rng = np.random.default_rng(0)
    sampled = np.zeros((10, 10), bool)
    sampled[0, :5] = True
    draws = np.array([random_next(sampled, rng) for _ in range(100_000)])
    assert not sampled.flat[draws].any()
    counts = np.bincount(draws, minlength=g.size)[~sampled.ravel()]
    assert chisquare(counts).pvalue > 1e-3


def test_random_never_repeats_and_exhausts():
    g = GridSpec(4)
    s = RandomSampler(g, np.random.default_rng(1))
    pts = drive(s, 16)
    assert sorted(pts) == list(range(16))
    with pytest.raises(SamplerExhausted):
        s.next_point()
    with pytest.raises(ValueError):
        s.ingest(pts[0])


# ---- grid -----------------------------------------------------------------

def test_grid_coarse_pass_is_the_lattice():
    g = GridSpec(200)
    s = GridSampler(g, rng=np.random.default_rng(2))
    pts = drive(s, 225)
    # lattice coordinate a/16 lies on a half-cell boundary for even a; take the lower cell
    def snap(a):
        d = np.abs(g.axis - a / 16)
        return int(np.flatnonzero(d <= d.min() + 1e-12)[0])
    expected = [g.flat(snap(a), snap(b)) for a in range(1, 16) for b in range(1, 16)]
    assert pts == expected


def test_grid_initial_design_is_lattice_prefix():
    g = GridSpec(200)
    s = GridSampler(g)
    assert s.initial_design(10) == list(s.coarse_queue)[:10]


def test_grid_fine_lattice_and_fifo():
    g = GridSpec(200)
    s = GridSampler(g, rng=np.random.default_rng(3))
    first = s.next_point()
    s.ingest(first, 0.9)          # triggers coarse cell (1, 1)
    second = s.next_point()
    s.ingest(second, 0.0)
    # coarse pass is finished before any refinement
    coarse = drive(s, 223)
    assert second == list(GridSampler(g).coarse_queue)[1]
    last_coarse = coarse[-1]
    s.set_probabilities([last_coarse], [0.8])  # triggers (15, 15) after (1, 1)
    fine = drive(s, 48)
    step = (1 / 16) / 5
    cell11 = [g.nearest(1 / 16 + da * step, 1 / 16 + db * step) for da in range(-2, 3) for db in range(-2, 3)]
    cell_last = [g.nearest(15 / 16 + da * step, 15 / 16 + db * step) for da in range(-2, 3) for db in range(-2, 3)]
    assert fine == [c for c in cell11 if c != first] + [c for c in cell_last if c != last_coarse]


def test_grid_falls_back_to_random():
    g = GridSpec(20)
    s = GridSampler(g, coarse=3, rng=np.random.default_rng(4))
    drive(s, 9)
    extra = drive(s, 20)
    assert len(set(extra)) == 20


def test_coarse_cell_mapping():
    s = GridSampler(GridSpec(200))
    assert s.coarse_cell(GridSpec(200).nearest(1 / 16, 1 / 16)) == (1, 1)
    assert s.coarse_cell(0) == (1, 1)
    assert s.coarse_cell(GridSpec(200).size - 1) == (15, 15)


# ---- DOE --------------------------------------------------------------------

def test_doe_equals_flat_adaptive():
    g = GridSpec(40)
    params = SamplerParams(h=0.03, lam=5, u=1e-6)
    doe, ref = DOESampler(g, params), AKM2DSampler(g, params, flat=True)
    rng = np.random.default_rng(5)
    for idx in doe.initial_design(5):
        doe.ingest(idx)
        ref.ingest(idx)
    for _ in range(50):
        a, b = doe.next_point(), ref.next_point()
        assert a == b
        p = rng.uniform()
        doe.ingest(a, p)
        ref.ingest(b, 0.0)


def test_doe_ignores_probabilities():
    g = GridSpec(30)
    s1, s2 = DOESampler(g), DOESampler(g)
    for idx in s1.initial_design(3):
        s1.ingest(idx, 1.0)
        s2.ingest(idx, 0.0)
    assert drive(s1, 20, 1.0) == drive(s2, 20, 0.0)


# ---- variance -----------------------------------------------------------------

def test_variance_first_pick_from_centre_is_a_corner():
    g = GridSpec(11)
    s = VarianceSampler(g, h_gp=0.1)
    s.ingest(g.flat(5, 5))
    i, j = g.unflat(s.next_point())
    assert i in (0, 10) and j in (0, 10)


def test_variance_matches_dense_posterior():
    g = GridSpec(15)
    s = VarianceSampler(g, h_gp=0.15, nugget=1e-3)
    samples = [7, 100, 31, 200, 150, 224]
    for idx in samples:
        s.ingest(idx)
    assert np.allclose(s.var, gp_variance_oracle(g, samples, 0.15, 1e-3), atol=1e-10)


def test_variance_near_zero_at_samples_without_nugget():
    g = GridSpec(15)
    s = VarianceSampler(g, h_gp=0.05, nugget=0.0)
    drive(s, 10)
    assert np.all(s.var[s.samples] < 1e-10)
    assert not s.sampled[s.next_point()]


def test_variance_nugget_bumps_then_fails():
    g = GridSpec(12)
    s = VarianceSampler(g, h_gp=2.0, nugget=0.0, max_bumps=0)
    with pytest.raises(np.linalg.LinAlgError):
        drive(s, 40)
    s2 = VarianceSampler(g, h_gp=2.0, nugget=0.0, max_bumps=3)
    drive(s2, 40)
    assert s2.nugget > 0


# ---- factory -------------------------------------------------------------------

@pytest.mark.parametrize("kind", SAMPLER_KINDS)
def test_make_sampler_interface(kind):
    g = GridSpec(30)
    s = make_sampler(kind, g, rng=np.random.default_rng(6))
    assert s.name == kind
    init = s.initial_design(5)
    assert len(set(init)) == 5
    for idx in init:
        s.ingest(idx, 0.5)
    s.set_probabilities(init, [0.1] * 5)
    nxt = s.next_point()
    assert nxt not in init and 0 <= nxt < g.size


def test_make_sampler_unknown():
    with pytest.raises(ValueError):
        make_sampler("sobol", GridSpec(10))
