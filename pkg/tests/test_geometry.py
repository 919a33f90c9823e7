import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist, squareform

from bubble_tower.errors import ConfigError
from bubble_tower.geometry import (
    NestedConfig,
    TowerConfig,
    admissible_rectangle,
    default_widths,
    nearest_distances,
    nested_distances,
    nested_points,
    rectangle_center,
    save_points,
    symmetry_orbit_check,
    tower_points,
)


def test_square_with_coincident_layers():
    pts = tower_points(TowerConfig(k=4, r=1.0, h=0.0))
    expected = np.array([[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0]], dtype=float)
    assert np.allclose(pts[:4], expected, atol=1e-15)
    assert np.allclose(pts[4:], expected, atol=1e-15)
    d_n, d_l = nearest_distances(TowerConfig(k=4, r=1.0, h=0.0))
    assert d_n == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert d_l == 0.0


def test_two_point_layers():
    pts = tower_points(TowerConfig(k=2, r=1.0, h=0.6))
    assert np.allclose(pts[0], [0.8, 0.0, 0.6], atol=1e-15)
    assert np.allclose(pts[2], [0.8, 0.0, -0.6], atol=1e-15)


def test_hexagon_distance():
    cfg = TowerConfig(k=6, r=2.0, h=0.1)
    d_n, d_l = nearest_distances(cfg)
    assert d_n == pytest.approx(2 * math.sqrt(0.99), rel=1e-14)
    pts = tower_points(cfg)
    assert np.linalg.norm(pts[1] - pts[0]) == pytest.approx(d_n, rel=1e-14)
    assert d_l == pytest.approx(0.4, rel=1e-15)


@settings(max_examples=60, deadline=None)
@given(k=st.integers(2, 200), r=st.floats(0.1, 1e6), h=st.floats(0.0, 0.99), N=st.integers(3, 7))
def test_distances_match_brute_force(k, r, h, N):
    cfg = TowerConfig(k=k, r=r, h=h, N=N)
    pts = tower_points(cfg)
    assert pts.shape == (2 * k, N)
    assert np.allclose(np.linalg.norm(pts, axis=1), r, rtol=1e-14)
    assert np.allclose(pts[k:, 2], -pts[:k, 2]) and np.allclose(pts[k:, :2], pts[:k, :2])
    d_n, d_l = nearest_distances(cfg)
    assert abs(np.linalg.norm(pts[1] - pts[0]) - d_n) <= 1e-12 * r
    assert abs(np.linalg.norm(pts[k] - pts[0]) - d_l) <= 1e-12 * r
    if k <= 60:
        D = squareform(pdist(pts[:k]))
        np.fill_diagonal(D, np.inf)
        assert abs(D.min() - d_n) <= 1e-12 * r


@settings(max_examples=40, deadline=None)
@given(k=st.integers(2, 64), r=st.floats(0.5, 1e4), h=st.floats(0.0, 0.95))
def test_orbit_closed(k, r, h):
    assert symmetry_orbit_check(tower_points(TowerConfig(k=k, r=r, h=h)), k)


def test_orbit_detects_perturbation():
    pts = tower_points(TowerConfig(k=8, r=3.0, h=0.2))
    pts[3, 0] += 1e-3
    assert not symmetry_orbit_check(pts, 8)
    assert symmetry_orbit_check(np.zeros((1, 3)), 5)
    # a tower is not invariant under a finer rotation
    assert not symmetry_orbit_check(tower_points(TowerConfig(k=8, r=3.0, h=0.2)), 16)


def test_nested_points():
    pts = nested_points(NestedConfig(n=2, t=1.0, l=0.0, N=6))
    assert np.allclose(pts[0], [0, 0, 0, 1, 0, 0])
    cfg = NestedConfig(n=7, t=3.0, l=0.3, N=7)
    pts = nested_points(cfg)
    assert np.all(pts[:, :3] == 0) and np.all(pts[:, 6:] == 0)
    assert np.allclose(np.linalg.norm(pts, axis=1), 3.0)
    d_n, d_l = nested_distances(cfg)
    assert d_n == pytest.approx(2 * 3.0 * math.sqrt(1 - 0.09) * math.sin(math.pi / 7), rel=1e-14)
    assert np.linalg.norm(pts[1] - pts[0]) == pytest.approx(d_n, rel=1e-13)
    assert d_l == pytest.approx(1.8) and np.linalg.norm(pts[7] - pts[0]) == pytest.approx(1.8)


@pytest.mark.parametrize(
    "make",
    [
        lambda: TowerConfig(k=1, r=1.0, h=0.1),
        lambda: TowerConfig(k=4, r=0.0, h=0.1),
        lambda: TowerConfig(k=4, r=1.0, h=1.0),
        lambda: TowerConfig(k=4, r=1.0, h=0.1, N=2),
        lambda: NestedConfig(n=4, t=1.0, l=0.1, N=5),
    ],
)
def test_invalid_configs(make):
    with pytest.raises(ConfigError):
        make()


def test_rectangle():
    m, k = 5.0, 1000
    (r_lo, r_hi), (h_lo, h_hi) = admissible_rectangle(k, m)
    rc, hc = rectangle_center(k, m)
    assert r_lo < rc < r_hi and h_lo < hc < h_hi
    assert rc == pytest.approx(m / (2 * math.pi) * k * math.log(k))
    a1, a2 = default_widths(m)
    assert r_hi - r_lo == pytest.approx(2 * a1 / (2 * math.pi) * k * math.log(k))
    assert h_hi - h_lo == pytest.approx(2 * a2 / (m * k))
    with pytest.raises(ConfigError):
        admissible_rectangle(k, m, widths=(m, 1.0))


def test_save_points(tmp_path):
    pts = tower_points(TowerConfig(k=3, r=1.5, h=0.25))
    path = save_points(pts, tmp_path / "pts.csv")
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(back, pts)
