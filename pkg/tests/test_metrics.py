import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from akm2d.metrics import MetricsRecord, detection_metrics, nearest_sample_distance, sampling_metrics
from akm2d.sampler import GridSpec


def brute_distances(points, m):
    out = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            x, y = (i + 1) / m, (j + 1) / m
            out[i, j] = min(math.hypot(x - px, y - py) for px, py in points)
    return out


def test_detection_counts():
    est = np.zeros((4, 4), bool)
    true = np.zeros((4, 4), bool)
    est[0, :3] = True
    true[0, 1:] = True
    p, r, f = detection_metrics(est, true)
    assert (p, r) == (2 / 3, 2 / 3)
    assert f == pytest.approx(2 / 3)


@pytest.mark.parametrize("est_any, true_any, expected", [
    (False, False, (1.0, 1.0, 1.0)),
    (False, True, (0.0, 0.0, 0.0)),
    (True, False, (0.0, 0.0, 0.0)),
])
def test_detection_empty_conventions(est_any, true_any, expected):
    est = np.zeros((3, 3), bool)
    true = np.zeros((3, 3), bool)
    est[1, 1] = est_any
    true[0, 0] = true_any
    assert detection_metrics(est, true) == expected


def test_detection_shape_mismatch():
    with pytest.raises(ValueError):
        detection_metrics(np.zeros((2, 2)), np.zeros((3, 3)))


@given(st.integers(0, 2**25 - 1), st.integers(1, 2**25 - 1))
@settings(max_examples=100)
def test_detection_bounds_and_f_is_harmonic_mean(a, b):
    est = np.array([(a >> k) & 1 for k in range(25)], bool).reshape(5, 5)
    true = np.array([(b >> k) & 1 for k in range(25)], bool).reshape(5, 5)
    p, r, f = detection_metrics(est, true)
    assert 0 <= p <= 1 and 0 <= r <= 1 and 0 <= f <= 1
    if p + r > 0:
        assert f == pytest.approx(2 * p * r / (p + r))
        assert min(p, r) <= f + 1e-15 and f <= max(p, r) + 1e-15


def test_distance_field_matches_brute_force():
    g = GridSpec(17)
    rng = np.random.default_rng(0)
    idx = rng.choice(g.size, 9, replace=False)
    pts = g.coords(idx)
    assert np.allclose(nearest_sample_distance(pts, g), brute_distances(pts, 17), atol=1e-15)


def test_sampling_metrics_hand_example():
    g = GridSpec(10)
    true = np.zeros((10, 10), bool)
    true[2:4, 2:4] = True
    pts = g.coords(np.array([g.flat(2, 2), g.flat(9, 9)]))
    er, ammd, mmd = sampling_metrics(pts, true, g)
    assert er == 0.5
    assert ammd == pytest.approx(math.hypot(0.1, 0.1))
    d = brute_distances(pts, 10)
    assert mmd == pytest.approx(d.max())


def test_sampling_metrics_empty_region_and_errors():
    g = GridSpec(8)
    er, ammd, _ = sampling_metrics(g.coords(np.array([0])), np.zeros((8, 8), bool), g)
    assert er == 0.0 and ammd == 0.0
    with pytest.raises(ValueError):
        sampling_metrics(np.zeros((0, 2)), np.zeros((8, 8), bool), g)


@given(st.lists(st.integers(0, 143), min_size=1, max_size=40, unique=True))
@settings(max_examples=50, deadline=None)
def test_mmd_nonincreasing_and_ammd_bounded(cells):
    g = GridSpec(12)
    true = np.zeros((12, 12), bool)
    true[3:7, 5:9] = True
    prev = np.inf
    for k in range(1, len(cells) + 1):
        er, ammd, mmd = sampling_metrics(g.coords(np.array(cells[:k])), true, g)
        assert mmd <= prev + 1e-15
        assert ammd <= mmd + 1e-15
        assert 0 <= er <= 1
        prev = mmd


def test_metrics_record_dict():
    rec = MetricsRecord(10, 0.5, 0.4, 0.44, 0.1, 0.2, 0.3, 0.01)
    assert rec.as_dict()["n_points"] == 10
