"""Tower and nested-tower center points, their spacings, and point-level symmetry."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigError

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class TowerConfig:
    k: int
    r: float
    h: float
    N: int = 3

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 2:
            raise ConfigError(f"k must be an integer >= 2, got {self.k}")
        if not self.r > 0:
            raise ConfigError(f"r must be positive, got {self.r}")
        if not 0 <= self.h < 1:
            raise ConfigError(f"h must lie in [0, 1), got {self.h}")
        if self.N < 3:
            raise ConfigError(f"towers live in N >= 3, got N={self.N}")
        object.__setattr__(self, "k", int(self.k))


@dataclass(frozen=True)
class NestedConfig:
    n: int
    t: float
    l: float  # noqa: E741
    N: int = 6

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n}")
        if not self.t > 0:
            raise ConfigError(f"t must be positive, got {self.t}")
        if not 0 <= self.l < 1:
            raise ConfigError(f"l must lie in [0, 1), got {self.l}")
        if self.N < 6:
            raise ConfigError(f"nested towers need N >= 6, got N={self.N}")
        object.__setattr__(self, "n", int(self.n))


def _two_layers(count, radius, height, N, offset):
    j = np.arange(count)
    angle = 2.0 * np.pi * j / count
    ring = radius * math.sqrt(1.0 - height * height)
    pts = np.zeros((2 * count, N))
    pts[:count, offset] = ring * np.cos(angle)
    pts[:count, offset + 1] = ring * np.sin(angle)
    pts[:count, offset + 2] = radius * height
    pts[count:] = pts[:count]
    pts[count:, offset + 2] *= -1.0
    return pts


def tower_points(cfg: TowerConfig) -> np.ndarray:
    """Rows 0..k-1 are x_j^+, rows k..2k-1 the mirrored x_j^-."""
    return _two_layers(cfg.k, cfg.r, cfg.h, cfg.N, 0)


def nested_points(cfg: NestedConfig) -> np.ndarray:
    """Same layout as :func:`tower_points`, placed in coordinates 4-6."""
    return _two_layers(cfg.n, cfg.t, cfg.l, cfg.N, 3)


def nearest_distances(cfg: TowerConfig) -> tuple[float, float]:
    """(neighbour distance in a layer, distance between mirrored layers)."""
    d_neighbor = 2.0 * cfg.r * math.sqrt(1.0 - cfg.h**2) * math.sin(math.pi / cfg.k)
    return d_neighbor, 2.0 * cfg.r * cfg.h


def nested_distances(cfg: NestedConfig) -> tuple[float, float]:
    d_neighbor = 2.0 * cfg.t * math.sqrt(1.0 - cfg.l**2) * math.sin(math.pi / cfg.n)
    return d_neighbor, 2.0 * cfg.t * cfg.l


def _same_set(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    if a.shape != b.shape:
        return False
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    if not np.all(d.min(axis=1) <= tol * scale):
        return False
    # one-to-one pairing; repeated points (coincident layers) must pair off too
    rows, cols = linear_sum_assignment(d)
    return bool(np.all(d[rows, cols] <= tol * scale))


def symmetry_orbit_check(points, k: int, tol: float = SYMMETRY_TOL) -> bool:
    """Invariance under rotation by 2pi/k in (y1, y2), y2 -> -y2 and y3 -> -y3."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        raise ValueError("empty point list")
    c, s = math.cos(2.0 * math.pi / k), math.sin(2.0 * math.pi / k)
    rotated = pts.copy()
    rotated[:, 0] = c * pts[:, 0] - s * pts[:, 1]
    rotated[:, 1] = s * pts[:, 0] + c * pts[:, 1]
    images = [rotated]
    flip2 = pts.copy()
    flip2[:, 1] *= -1.0
    images.append(flip2)
    if pts.shape[1] >= 3:
        flip3 = pts.copy()
        flip3[:, 2] *= -1.0
        images.append(flip3)
    return all(_same_set(pts, img, tol) for img in images)


def default_widths(m: float) -> tuple[float, float]:
    """Widths (alpha1, alpha2) of the admissible rectangle; the same defaults serve (beta1, beta2).

    Wide enough to hold the leading-order critical point from k = 10^3 on,
    where its r-coordinate still sits about 30 % above the rectangle centre.
    """
    return 0.4 * m, 0.8 * math.pi * (m + 2.0) / m


def rectangle_center(k: int, m: float) -> tuple[float, float]:
    return m / (2.0 * math.pi) * k * math.log(k), math.pi * (m + 2.0) / (m * k)


def admissible_rectangle(k: int, m: float, widths=None):
    """((r_lo, r_hi), (h_lo, h_hi)) = ([(m -+ a1)/2pi k ln k], [(pi(m+2) -+ a2)/(m k)])."""
    a1, a2 = default_widths(m) if widths is None else widths
    L = k * math.log(k)
    r_range = ((m - a1) / (2.0 * math.pi) * L, (m + a1) / (2.0 * math.pi) * L)
    h_range = ((math.pi * (m + 2.0) - a2) / (m * k), (math.pi * (m + 2.0) + a2) / (m * k))
    if r_range[0] <= 0 or h_range[0] <= 0 or h_range[1] >= 1:
        raise ConfigError(f"rectangle widths ({a1:g}, {a2:g}) leave the admissible region at k={k}")
    return r_range, h_range


def save_points(points, path) -> Path:
    path = Path(path)
    pts = np.asarray(points, dtype=float)
    header = ",".join(f"y{i + 1}" for i in range(pts.shape[1]))
    np.savetxt(path, pts, delimiter=",", header=header, comments="", fmt="%.17g")
    return path
