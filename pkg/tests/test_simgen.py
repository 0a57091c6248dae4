import numpy as np
import pytest

from akm2d.simgen import (
    bspline_basis,
    generate_disk_phantom,
    generate_phantom,
    mean_field,
    read_pgm,
    write_field_csv,
    write_pgm,
)


def test_partition_of_unity_and_nonnegative():
    B = bspline_basis(200)
    assert B.shape == (200, 13)
    assert np.all(B >= 0)
    assert np.allclose(B.sum(1), 1.0, atol=1e-13)


def test_basis_needs_enough_functions():
    with pytest.raises(ValueError):
        bspline_basis(50, n_basis=3)


def test_mean_field_values():
    M = mean_field(50)
    x = np.arange(1, 51) / 51
    assert M[3, 7] == pytest.approx(np.exp(-(x[3] ** 2 + x[7] ** 2) / 4))
    assert np.allclose(M, M.T)


def test_phantom_deterministic_and_decomposed():
    a, b = generate_phantom(seed=42), generate_phantom(seed=42)
    for name in ("M", "A", "E", "true_region"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert np.array_equal(a.Y, a.M + a.A + a.E)
    assert not np.array_equal(a.E, generate_phantom(seed=43).E)


def test_phantom_clusters_and_noise():
    ph = generate_phantom(seed=1)
    assert len(ph.meta["clusters"]) == 7
    assert ph.A.min() >= 0 and ph.A.max() <= 0.3 + 1e-12
    assert ph.E.std() == pytest.approx(0.05, rel=0.02)


def test_zero_delta_gives_empty_region():
    ph = generate_phantom(seed=3, delta=0.0)
    assert not ph.true_region.any() and not ph.A.any()


def test_validation():
    with pytest.raises(ValueError):
        generate_phantom(m=40)
    with pytest.raises(ValueError):
        generate_phantom(n_clusters=170)


def test_true_region_area_over_seeds():
    fracs = [generate_phantom(seed=s).true_region.mean() for s in range(100)]
    assert np.mean(fracs) == pytest.approx(0.054, abs=0.02)
    # frozen seed average, guards against silent changes to the generator
    assert np.mean(fracs) == pytest.approx(0.05850625, abs=1e-12)


def test_disk_phantom():
    ph = generate_disk_phantom(m=200, radius=0.0747, seed=0)
    area = ph.true_region.mean()
    assert area == pytest.approx(np.pi * 0.0747**2, rel=0.05)
    assert set(np.unique(ph.A)) == {0.0, 0.3}


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    f = rng.normal(size=(30, 40))
    path = tmp_path / "f.pgm"
    write_pgm(path, f, comment="test\nfield")
    back = read_pgm(path)
    assert back.shape == (30, 40)
    step = (f.max() - f.min()) / 65535
    assert np.max(np.abs(back - f)) <= step / 2 + 1e-12
    const = tmp_path / "c.pgm"
    write_pgm(const, np.full((3, 3), 2.5))
    assert np.all(read_pgm(const) == 2.5)


def test_pgm_header(tmp_path):
    path = tmp_path / "h.pgm"
    write_pgm(path, np.zeros((2, 5)))
    data = path.read_bytes()
    assert data.startswith(b"P5\n")
    assert b"5 2\n65535\n" in data
    assert len(data.split(b"65535\n", 1)[1]) == 2 * 2 * 5


def test_field_csv(tmp_path):
    path = tmp_path / "f.csv"
    arr = np.array([[1.5, -2.0], [0.25, 3.0]])
    write_field_csv(path, arr)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,value"
    rows = [l.split(",") for l in lines[1:]]
    back = np.zeros((2, 2))
    for i, j, v in rows:
        back[int(i), int(j)] = float(v)
    assert np.array_equal(back, arr)
