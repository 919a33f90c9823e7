"""Bilinear boundary form I_j, the integration-by-parts identity behind it, and bubble-pair boundary terms.

For smooth u, xi on a bounded domain and any smooth V,

    I_j(u, xi) + \\oint (V - 1) u xi nu_j - \\oint u^p xi nu_j
        = \\int u xi dV/dy_j + \\int (-Lap u + V u - u^p) d_j xi
          + \\int (-Lap xi + V xi - p u^(p-1) xi) d_j u,

so on a grid the assembled difference is pure discretisation error.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .artifacts import write_json
from .errors import ConfigError, ShapeError
from .geometry import TowerConfig, nearest_distances, tower_points
from .model import ModelParams, potential_gradient, potential_value
from .profile import RadialProfile

MIN_FACES = 16
LEMMA_SIGMA = 0.05


@dataclass(frozen=True, eq=False)
class GridField:
    """Nodal values on the uniform box grid lower + spacing * index.

    With ``ghost = 1`` the array carries one extra layer of nodes outside the
    box, so every derivative at a domain node is a centred difference and the
    discretisation error is even in the spacing.  Without it, boundary rows
    fall back to second-order one-sided formulas.
    """

    lower: np.ndarray
    spacing: float
    values: np.ndarray
    gradient: object = None  # optional callable(points) -> (..., d)
    ghost: int = 0

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        object.__setattr__(self, "lower", lower)
        d = lower.size
        if d not in (2, 3) or self.values.ndim != d:
            raise ShapeError(f"grid fields live in 2 or 3 dimensions, got lower={lower}, values.ndim={self.values.ndim}")
        if not self.spacing > 0:
            raise ShapeError("spacing must be positive")
        if self.ghost not in (0, 1):
            raise ShapeError("ghost layer must be 0 or 1 nodes thick")
        if min(self.shape) < MIN_FACES + 1:
            raise ShapeError(f"need at least {MIN_FACES} cells per side, got shape {self.shape}")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def shape(self) -> tuple:
        return tuple(n - 2 * self.ghost for n in self.values.shape)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.spacing * (np.array(self.shape) - 1)

    def _trim(self, arr):
        g = self.ghost
        return arr[tuple(slice(g, n - g) for n in arr.shape)] if g else arr

    @property
    def inner(self) -> np.ndarray:
        return self._trim(self.values)

    def points(self) -> np.ndarray:
        axes = [self.lower[i] + self.spacing * np.arange(n) for i, n in enumerate(self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def grad(self) -> list:
        if self.gradient is not None:
            g = self.gradient(self.points())
            return [g[..., i] for i in range(self.dim)]
        return [self._trim(g) for g in np.gradient(self.values, self.spacing, edge_order=2)]

    @classmethod
    def from_function(cls, func, lower, upper, spacing, gradient=None, ghost: int = 1) -> "GridField":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        counts = np.rint((upper - lower) / spacing).astype(int) + 1 + 2 * ghost
        axes = [lower[i] + spacing * (np.arange(n) - ghost) for i, n in enumerate(counts)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return cls(lower, spacing, func(pts), gradient, ghost)


def _check_pair(u: GridField, xi: GridField, j: int):
    same = (
        u.values.shape == xi.values.shape
        and u.spacing == xi.spacing
        and u.ghost == xi.ghost
        and np.array_equal(u.lower, xi.lower)
    )
    if not same:
        raise ShapeError("u and xi must share the same grid")
    if not 1 <= j <= u.dim:
        raise ShapeError(f"axis j={j} outside 1..{u.dim}")


def _trap_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _volume_weights(shape, h) -> np.ndarray:
    w = np.ones(())
    for n in shape:
        w = np.multiply.outer(w, _trap_weights(n, h))
    return w


def _face(arr, axis, side):
    idx = [slice(None)] * arr.ndim
    idx[axis] = 0 if side < 0 else -1
    return arr[tuple(idx)]


def _face_integral(arr, axis, side, shape, h):
    face_shape = [n for i, n in enumerate(shape) if i != axis]
    return float(np.sum(_face(arr, axis, side) * _volume_weights(face_shape, h)))


def _second_derivative(f, axis, h, ghost):
    f = np.moveaxis(f, axis, 0)
    if ghost:
        out = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h**2
        return np.moveaxis(out, 0, axis)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h**2
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h**2
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def laplacian(field_: GridField) -> np.ndarray:
    """Standard 5/7-point stencil at every domain node (one-sided rows on the boundary without ghosts)."""
    total = 0.0
    for a in range(field_.dim):
        d2 = _second_derivative(field_.values, a, field_.spacing, field_.ghost)
        if field_.ghost:
            # trim the directions not differentiated along
            idx = tuple(slice(None) if b == a else slice(1, -1) for b in range(field_.dim))
            d2 = d2[idx]
        total = total + d2
    return total


def _surface_terms(u, du, xi, dxi, j, shape, h):
    """The four surface integrals of I_j on a box (j is 0-based here)."""
    d = len(shape)
    t = {"dnu_u_dj_xi": 0.0, "dnu_xi_dj_u": 0.0, "grad_dot": 0.0, "u_xi": 0.0}
    dot = sum(du[i] * dxi[i] for i in range(d))
    for axis in range(d):
        for side in (-1, 1):
            t["dnu_u_dj_xi"] -= side * _face_integral(du[axis] * dxi[j], axis, side, shape, h)
            t["dnu_xi_dj_u"] -= side * _face_integral(dxi[axis] * du[j], axis, side, shape, h)
    for side in (-1, 1):
        t["grad_dot"] += side * _face_integral(dot, j, side, shape, h)
        t["u_xi"] += side * _face_integral(u * xi, j, side, shape, h)
    return t


def bilinear_form_Ij(u: GridField, xi: GridField, j: int) -> float:
    """-\\oint d_nu u d_j xi - \\oint d_nu xi d_j u + \\oint <grad u, grad xi> nu_j + \\oint u xi nu_j; j is 1-based."""
    _check_pair(u, xi, j)
    terms = _surface_terms(u.inner, u.grad(), xi.inner, xi.grad(), j - 1, u.shape, u.spacing)
    return sum(terms.values())


@dataclass
class PohozaevReport:
    j: int
    boundary: dict
    volume: dict
    total: float
    spacing: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)


def generalized_identity_residual(
    u: GridField, xi: GridField, params: ModelParams, p: float, j: int, coupling: str = "linearized", V=None
) -> PohozaevReport:
    """Assemble LHS - RHS of the identity above on a box grid.

    ``coupling="symmetric"`` replaces p u^(p-1) xi by u^(p-1) xi (an assembly
    self-check; the identity itself only holds for the linearized coupling).
    ``V`` may be a pair (value(points), gradient(points)) overriding the model potential.
    """
    _check_pair(u, xi, j)
    if coupling not in ("linearized", "symmetric"):
        raise ConfigError(f"unknown coupling {coupling!r}")
    h, shape, a = u.spacing, u.shape, j - 1
    pts = u.points()
    if V is None:
        v = potential_value(params, np.linalg.norm(pts, axis=-1))
        dv = potential_gradient(params, pts)[..., a]
    else:
        v, dv = V[0](pts), V[1](pts)[..., a]
    du, dxi = u.grad(), xi.grad()
    uu, xx = u.inner, xi.inner
    boundary = _surface_terms(uu, du, xx, dxi, a, shape, h)
    boundary["V_minus_1_u_xi"] = sum(side * _face_integral((v - 1.0) * uu * xx, a, side, shape, h) for side in (-1, 1))
    boundary["up_xi"] = -sum(side * _face_integral(uu**p * xx, a, side, shape, h) for side in (-1, 1))
    w = _volume_weights(shape, h)
    factor = p if coupling == "linearized" else 1.0
    res_u = -laplacian(u) + v * uu - uu**p
    res_xi = -laplacian(xi) + v * xx - factor * uu ** (p - 1.0) * xx
    volume = {
        "u_xi_dV": -float(np.sum(w * uu * xx * dv)),
        "pde_u": -float(np.sum(w * res_u * dxi[a])),
        "pde_xi": -float(np.sum(w * res_xi * du[a])),
    }
    total = sum(boundary.values()) + sum(volume.values())
    return PohozaevReport(j=j, boundary=boundary, volume=volume, total=total, spacing=h)


def gaussian_field(center, width, amplitude=1.0):
    """(value, gradient) callables of amplitude * exp(-|y - c|^2 / (2 width^2))."""
    center = np.asarray(center, dtype=float)

    def value(y):
        return amplitude * np.exp(-np.sum((y - center) ** 2, axis=-1) / (2.0 * width**2))

    def gradient(y):
        return -(y - center) / width**2 * value(y)[..., None]

    return value, gradient


def convergence_table(make_pair, params, p, j, spacings) -> list:
    """Residual at each spacing and the ratio to the next finer one."""
    rows = []
    for h in spacings:
        u, xi = make_pair(h)
        rows.append({"spacing": h, "residual": generalized_identity_residual(u, xi, params, p, j).total})
    for a, b in zip(rows, rows[1:]):
        a["ratio"] = a["residual"] / b["residual"]
    return rows


# -- analytic fields on spheres ------------------------------------------------------


def sphere_rule(N: int, n_theta: int = 48, n_phi: int = 96, n_chi: int = 24):
    """Nodes on S^(N-1) and weights summing to its area; only (y1, y2, y3) and |y'| are resolved.

    A Gauss-Legendre rule in cos(theta) keeps the poles well sampled; for N > 3 the
    remaining coordinates enter through the angle chi between R^3 and its complement.
    """
    if N < 2:
        raise ConfigError("sphere rule needs N >= 2")
    phi = 2.0 * math.pi * (np.arange(n_phi) + 0.5) / n_phi
    if N == 2:
        nodes = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return nodes, np.full(n_phi, 2.0 * math.pi / n_phi)
    x, w = np.polynomial.legendre.leggauss(n_theta)
    st = np.sqrt(1.0 - x * x)
    omega = np.stack(
        [np.outer(st, np.cos(phi)).ravel(), np.outer(st, np.sin(phi)).ravel(), np.repeat(x, n_phi)], axis=-1
    )
    w_omega = np.repeat(w, n_phi) * (2.0 * math.pi / n_phi)
    if N == 3:
        return omega, w_omega
    xc, wc = np.polynomial.legendre.leggauss(n_chi)
    chi = 0.25 * math.pi * (xc + 1.0)
    wchi = 0.25 * math.pi * wc * np.cos(chi) ** 2 * np.sin(chi) ** (N - 4)
    lower = 2.0 * math.pi ** ((N - 3) / 2.0) / math.gamma((N - 3) / 2.0)  # |S^(N-4)|
    nodes = np.zeros((chi.size * len(omega), N))
    nodes[:, :3] = (np.cos(chi)[:, None, None] * omega[None]).reshape(-1, 3)
    nodes[:, 3] = np.repeat(np.sin(chi), len(omega))
    weights = (wchi[:, None] * w_omega[None, :]).ravel() * lower
    return nodes, weights


def _bubble(profile, center):
    def value(y):
        return profile.value(np.linalg.norm(y - center, axis=-1))

    def gradient(y):
        z = y - center
        rho = np.linalg.norm(z, axis=-1)
        _, u1, _ = profile.eval(rho)
        return u1[:, None] * z / rho[:, None]

    return value, gradient


def _bubble_shift(profile, center, direction):
    """Derivative of U(|y - c|) when c moves with velocity ``direction``, and its gradient."""

    def value(y):
        z = y - center
        rho = np.linalg.norm(z, axis=-1)
        _, u1, _ = profile.eval(rho)
        return -u1 * (z @ direction) / rho

    def gradient(y):
        z = y - center
        rho = np.linalg.norm(z, axis=-1)
        _, u1, u2 = profile.eval(rho)
        zh = z / rho[:, None]
        proj = zh @ direction
        return -(u2 * proj)[:, None] * zh - (u1 / rho)[:, None] * (direction[None, :] - proj[:, None] * zh)

    return value, gradient


def sphere_form(u, xi, center, radius, ell, N, p=None, **rule):
    """I_ell(u, xi) on the ball B(center, radius) for analytic (value, gradient) pairs.

    With ``p`` given, also returns \\oint u^p xi nu_ell.
    """
    nodes, weights = sphere_rule(N, **rule)
    a = ell - 1
    y = center[None, :] + radius * nodes
    da = weights * radius ** (N - 1)
    uv, ug = u[0](y), u[1](y)
    xv, xg = xi[0](y), xi[1](y)
    nu = nodes
    dnu_u = np.sum(ug * nu, axis=1)
    dnu_xi = np.sum(xg * nu, axis=1)
    integrand = -dnu_u * xg[:, a] - dnu_xi * ug[:, a] + np.sum(ug * xg, axis=1) * nu[:, a] + uv * xv * nu[:, a]
    value = float(np.sum(da * integrand))
    if p is None:
        return value
    return value, float(np.sum(da * uv**p * xv * nu[:, a]))


def bubble_pair_boundary_estimates(
    profile: RadialProfile, cfg: TowerConfig, pair, ell: int, sigma: float = LEMMA_SIGMA, **rule
) -> dict:
    """I_ell(U_{x_i}, dU_{x_j}/dr, Omega) and the dU/dh variant on Omega = B(x_1^+, |x_2^+ - x_1^+|/2).

    ``pair`` is (i, j, sign_i, sign_j) with 1-based in-layer indices and signs +1/-1.
    """
    if ell not in (1, 3):
        raise ConfigError("ell must be 1 or 3")
    i, j, si, sj = pair
    pts = tower_points(cfg)
    k, N = cfg.k, cfg.N

    def point(idx, sign):
        return pts[(idx - 1) % k + (0 if sign > 0 else k)]

    xi_c, xj_c = point(i, si), point(j, sj)
    d_n, _ = nearest_distances(cfg)
    center, radius = pts[0], 0.5 * d_n
    s = math.sqrt(1.0 - cfg.h**2)
    angle = 2.0 * math.pi * (j - 1) / k
    dir_r = np.zeros(N)
    dir_r[:3] = (s * math.cos(angle), s * math.sin(angle), sj * cfg.h)
    dir_h = np.zeros(N)
    dir_h[:3] = (-cfg.r * cfg.h / s * math.cos(angle), -cfg.r * cfg.h / s * math.sin(angle), sj * cfg.r)
    u = _bubble(profile, xi_c)
    val_r, surf_r = sphere_form(u, _bubble_shift(profile, xj_c, dir_r), center, radius, ell, N, profile.p, **rule)
    val_h, surf_h = sphere_form(u, _bubble_shift(profile, xj_c, dir_h), center, radius, ell, N, profile.p, **rule)
    return {
        "I_r": val_r,
        "I_h": val_h,
        "up_surface_r": surf_r,
        "up_surface_h": surf_h,
        "bound": math.exp(-((profile.p + 1.0) / 2.0 - sigma) * d_n),
        "distance": d_n,
    }


def save_report(report: PohozaevReport, path) -> Path:
    path = Path(path)
    return write_json(report.to_json(), path)
