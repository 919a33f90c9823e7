"""Leading-order reduced energies F(r, h), G(t, l), their critical points and diagnostics.

Per bubble pair the model is

    A1/r^m + A2 - 2 B1 g(d) - B1 g(e),   g(x) = e^-x x^-(N-1)/2,

with d = 2 pi sqrt(1-h^2) r / k the in-layer neighbour distance and e = 2 r h
the distance to the mirrored bubble.  Gradients and Hessians are exact
derivatives of this formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientSet
from .errors import ConfigError, DegenerateLayerError, SearchFailure
from .geometry import TowerConfig, admissible_rectangle, nearest_distances, rectangle_center, tower_points
from .model import ModelParams
from .profile import RadialProfile

GRADIENT_TOL = 1e-8
MAX_NEWTON = 200
MIN_LAYER = 1e-12


def _g(x, q):
    """g, g', g'' for g(x) = e^-x x^-q."""
    g0 = math.exp(-x) * x ** (-q)
    a = 1.0 + q / x
    return g0, -g0 * a, g0 * (a * a + q / (x * x))


@dataclass(frozen=True)
class ReducedEnergyReport:
    value: float
    dF_dr: float
    dF_dh: float
    terms: dict
    at: tuple
    residual_norm: float
    dropped_term: float = 0.0
    offset: float = 0.0


@dataclass(frozen=True)
class CriticalPoint:
    r_star: float
    h_star: float
    grad_residual: float
    in_interior: bool
    k: int
    iterations: int = 0
    rect: tuple = ()
    boundary_signs: dict = field(default_factory=dict)

    @property
    def boundary_ok(self) -> bool:
        return all(self.boundary_signs.values())


class _Landscape:
    """Value, exact gradient and Hessian of F / k at one (r, h)."""

    def __init__(self, coeffs: CoefficientSet, params: ModelParams, k: int):
        if k < 2:
            raise ConfigError(f"k must be >= 2, got {k}")
        self.A1, self.A2, self.B1 = coeffs.A1, coeffs.A2, coeffs.B1
        self.m = params.m
        self.q = 0.5 * (coeffs.N - 1)
        self.k = k
        self.c = 2.0 * math.pi / k

    def parts(self, r, h):
        if not (r > 0 and 0 < h < 1):
            raise ConfigError(f"need r > 0 and 0 < h < 1, got r={r}, h={h}")
        if 2.0 * r * h < MIN_LAYER:
            raise DegenerateLayerError(f"layer distance 2rh={2 * r * h:.3g} is degenerate")
        A1, B1, m, q, c = self.A1, self.B1, self.m, self.q, self.c
        s = math.sqrt(1.0 - h * h)
        s_h = -h / s
        s_hh = -1.0 / s**3
        d, e = c * r * s, 2.0 * r * h
        gd, gd1, gd2 = _g(d, q)
        ge, ge1, ge2 = _g(e, q)
        terms = {"self": A1 * r**-m, "constant": self.A2, "neighbor": -2.0 * B1 * gd, "layer": -B1 * ge}
        # first derivatives, split by term so relative residuals have a natural scale
        d_r, d_h = c * s, c * r * s_h
        grad_r = (-m * A1 * r ** (-m - 1), -2.0 * B1 * gd1 * d_r, -B1 * ge1 * 2.0 * h)
        grad_h = (0.0, -2.0 * B1 * gd1 * d_h, -B1 * ge1 * 2.0 * r)
        H_rr = m * (m + 1) * A1 * r ** (-m - 2) - 2.0 * B1 * gd2 * d_r**2 - B1 * ge2 * 4.0 * h * h
        H_hh = -2.0 * B1 * (gd2 * d_h**2 + gd1 * c * r * s_hh) - B1 * ge2 * 4.0 * r * r
        H_rh = -2.0 * B1 * (gd2 * d_r * d_h + gd1 * c * s_h) - B1 * (ge2 * 4.0 * r * h + 2.0 * ge1)
        return {
            "terms": terms,
            "grad_r": grad_r,
            "grad_h": grad_h,
            "hess": np.array([[H_rr, H_rh], [H_rh, H_hh]]),
            "d": d,
            "e": e,
        }

    def gradient(self, r, h):
        P = self.parts(r, h)
        return np.array([sum(P["grad_r"]), sum(P["grad_h"])]), P

    def relative_residual(self, r, h) -> float:
        g, P = self.gradient(r, h)
        sr = sum(abs(v) for v in P["grad_r"])
        sh = sum(abs(v) for v in P["grad_h"])
        # far apart every interaction underflows; an exactly zero derivative is stationary
        return max(abs(g[0]) / sr if sr else 0.0, abs(g[1]) / sh if sh else 0.0)


def reduced_energy(coeffs: CoefficientSet, params: ModelParams, k: int, r: float, h: float) -> ReducedEnergyReport:
    land = _Landscape(coeffs, params, k)
    P = land.parts(r, h)
    terms = {name: k * v for name, v in P["terms"].items()}
    value = k * sum(P["terms"].values())
    dropped = max(land.q / P["d"], land.q / P["e"])
    return ReducedEnergyReport(
        value=value,
        dF_dr=k * sum(P["grad_r"]),
        dF_dh=k * sum(P["grad_h"]),
        terms=terms,
        at=(k, r, h),
        residual_norm=land.relative_residual(r, h),
        dropped_term=dropped,
    )


def reduced_gradient(coeffs: CoefficientSet, params: ModelParams, k: int, r: float, h: float):
    g, _ = _Landscape(coeffs, params, k).gradient(r, h)
    return k * float(g[0]), k * float(g[1])


def reduced_hessian(coeffs: CoefficientSet, params: ModelParams, k: int, r: float, h: float) -> np.ndarray:
    return k * _Landscape(coeffs, params, k).parts(r, h)["hess"]


def printed_gradient(coeffs: CoefficientSet, params: ModelParams, k: int, r: float, h: float):
    """Leading terms as printed: the algebraic prefactor and the layer term's r-dependence are not differentiated."""
    q = 0.5 * (coeffs.N - 1)
    s = math.sqrt(1.0 - h * h)
    d, e = 2.0 * math.pi * s * r / k, 2.0 * r * h
    gd, ge = math.exp(-d) * d**-q, math.exp(-e) * e**-q
    B1 = coeffs.B1
    dr = k * (-params.m * coeffs.A1 / r ** (params.m + 1) + 4.0 * B1 * math.pi / k * s * gd)
    dh = k * (-4.0 * B1 * math.pi * r * h / (k * s) * gd + 2.0 * B1 * r * ge)
    return dr, dh


def boundary_signs(coeffs, params, k, rect, samples: int = 9) -> dict:
    """F_r > 0 on the left edge, < 0 on the right; F_h > 0 on the bottom, < 0 on the top."""
    land = _Landscape(coeffs, params, k)
    (r_lo, r_hi), (h_lo, h_hi) = rect
    hs = np.linspace(h_lo, h_hi, samples)
    rs = np.linspace(r_lo, r_hi, samples)
    return {
        "dF_dr_left_positive": all(land.gradient(r_lo, h)[0][0] > 0 for h in hs),
        "dF_dr_right_negative": all(land.gradient(r_hi, h)[0][0] < 0 for h in hs),
        "dF_dh_bottom_positive": all(land.gradient(r, h_lo)[0][1] > 0 for r in rs),
        "dF_dh_top_negative": all(land.gradient(r, h_hi)[0][1] < 0 for r in rs),
    }


def find_critical_point(coeffs: CoefficientSet, params: ModelParams, k: int, rect=None, start=None) -> CriticalPoint:
    """Damped Newton on the exact gradient, in variables scaled by the rectangle centre."""
    params.require_tower()
    land = _Landscape(coeffs, params, k)
    if rect is None:
        rect = admissible_rectangle(k, params.m)
    (r_lo, r_hi), (h_lo, h_hi) = rect
    if not (0 < r_lo < r_hi and 0 < h_lo < h_hi < 1):
        raise ConfigError(f"rectangle {rect} is not inside (0, inf) x (0, 1)")
    r0, h0 = rectangle_center(k, params.m) if start is None else start
    scale = np.array([r0, h0])
    x = np.array([r0, h0]) / scale

    def scaled_grad(x):
        g, P = land.gradient(*(x * scale))
        gs = g * scale
        norm = np.array([sum(abs(v) for v in P["grad_r"]) * scale[0], sum(abs(v) for v in P["grad_h"]) * scale[1]])
        return gs, P, norm

    gs, P, norm = scaled_grad(x)
    ref = norm.copy()  # fixed yardstick for the damping test
    iterations = 0
    while np.max(np.abs(gs) / norm) > GRADIENT_TOL:
        if iterations >= MAX_NEWTON:
            raise SearchFailure(f"Newton did not converge in {MAX_NEWTON} iterations at k={k}")
        iterations += 1
        H = P["hess"] * np.outer(scale, scale)
        try:
            step = -np.linalg.solve(H, gs)
        except np.linalg.LinAlgError as exc:
            raise SearchFailure(f"singular Hessian at k={k}") from exc
        t = 1.0
        current = np.linalg.norm(gs / ref)
        while True:
            trial = x + t * step
            r_t, h_t = trial * scale
            if r_t > 0 and 0 < h_t < 1:
                g_t, P_t, n_t = scaled_grad(trial)
                if np.linalg.norm(g_t / ref) < current or t < 1e-12:
                    break
            t *= 0.5
            if t < 1e-12:
                raise SearchFailure(f"line search stalled at k={k}")
        x, gs, P, norm = trial, g_t, P_t, n_t
    r_star, h_star = (x * scale).tolist()
    if P["hess"][1, 1] >= 0:
        raise SearchFailure(f"critical point at k={k} is not a maximum in h")
    interior = r_lo < r_star < r_hi and h_lo < h_star < h_hi
    return CriticalPoint(
        r_star=r_star,
        h_star=h_star,
        grad_residual=land.relative_residual(r_star, h_star),
        in_interior=interior,
        k=k,
        iterations=iterations,
        rect=rect,
        boundary_signs=boundary_signs(coeffs, params, k, rect),
    )


def nested_energy(coeffs, params, n, t, l, offset: float = 0.0, rect=None):  # noqa: E741
    """G(t, l) = offset + F(t, l) with n bubbles per layer; returns (report, critical point)."""
    params.require_tower(min_dim=6)
    rep = reduced_energy(coeffs, params, n, t, l)
    rep = ReducedEnergyReport(
        value=rep.value + offset,
        dF_dr=rep.dF_dr,
        dF_dh=rep.dF_dh,
        terms=rep.terms,
        at=rep.at,
        residual_norm=rep.residual_norm,
        dropped_term=rep.dropped_term,
        offset=offset,
    )
    return rep, find_critical_point(coeffs, params, n, rect)


def config_at(cp: CriticalPoint, N: int = 3) -> TowerConfig:
    return TowerConfig(k=cp.k, r=cp.r_star, h=cp.h_star, N=max(N, 3))


# -- balance, scaling and interaction diagnostics ---------------------------------


def balance_residuals(profile: RadialProfile, coeffs: CoefficientSet, params: ModelParams, cfg: TowerConfig) -> dict:
    """Force-balance ratios; 'literal' uses a(m+1)/2, 'stationary' uses a m. NaN flags h = 0."""
    m, k, r, h = params.m, cfg.k, cfg.r, cfg.h
    mass = coeffs.A1 / coeffs.a1  # integral of U^2
    d_n, d_l = nearest_distances(cfg)
    attract_n = 4.0 * coeffs.B1 * profile.value(d_n) * math.pi / k
    out = {}
    for label, coef in (("literal", params.a1 * (m + 1) / 2.0), ("stationary", params.a1 * m)):
        force = coef / r ** (m + 1) * mass
        out[f"ratio_neighbor_{label}"] = force * math.sqrt(1.0 - h * h) / attract_n
        if h == 0:
            out[f"ratio_layer_{label}"] = float("nan")
        else:
            out[f"ratio_layer_{label}"] = force * h / (coeffs.B1 * profile.value(d_l))
    return out


def scaling_relations(profile: RadialProfile, params: ModelParams, cfg: TowerConfig, band=(0.1, 10.0)) -> dict:
    m, k, r = params.m, cfg.k, cfg.r
    d_n, d_l = nearest_distances(cfg)
    u_n, u_l = profile.value(d_n), profile.value(d_l)
    ratio_n = (k / r ** (m + 1)) / u_n
    ratio_l = (1.0 / (k * r ** (m + 1))) / u_l
    return {
        "ratio_neighbor": ratio_n,
        "ratio_layer": ratio_l,
        "in_band": band[0] <= ratio_n <= band[1] and band[0] <= ratio_l <= band[1],
        # U(d_neighbor)/k^2 against 1/r^(m+2)
        "dominance": (u_n / k**2) * r ** (m + 2),
    }


def _mixed_derivative(profile, y, center, v):
    """d/dy1 of U'(|y-c|) <(y-c)/|y-c|, v>, i.e. of the directional derivative of U_c along -v."""
    z = y - center
    rho = float(np.linalg.norm(z))
    _, u1, u2 = profile.eval(rho)
    zhat = z / rho
    e1 = np.zeros_like(z)
    e1[0] = 1.0
    return u2 * zhat[0] * float(zhat @ v) + u1 * float((e1 / rho - z * z[0] / rho**3) @ v)


def _second_partial(profile, y, center, i, j):
    z = y - center
    rho = float(np.linalg.norm(z))
    _, u1, u2 = profile.eval(rho)
    delta = 1.0 if i == j else 0.0
    return u2 * z[i] * z[j] / rho**2 + u1 * (delta / rho - z[i] * z[j] / rho**3)


def interaction_derivative_check(profile: RadialProfile, cfg: TowerConfig) -> dict:
    """Exact d/dy1(sqrt(1-h^2) dU_c/dy1 + dU_c/dr) at x_1^+ for c = x_2^+ and x_k^+, against the asymptote."""
    if cfg.k < 8:
        raise ConfigError("the asymptote needs k >= 8")
    pts = tower_points(cfg)
    k, h = cfg.k, cfg.h
    s = math.sqrt(1.0 - h * h)
    x1 = pts[0]
    values = {}
    for label, idx in (("x2", 1), ("xk", k - 1)):
        c = pts[idx]
        # dU_c/dr = -U' <(y-c)/|y-c|, c/r>, dU_c/dy1 = U' (y-c)_1/|y-c|
        v = -c / cfg.r
        v[0] += s
        values[label] = _mixed_derivative(profile, x1, c, v)
    d_n, _ = nearest_distances(cfg)
    asym = 2.0 * math.pi**2 * s / k**2 * profile.value(d_n)
    companion = h * sum(_second_partial(profile, x1, pts[idx], 0, 2) for idx in (1, k - 1, k))
    return {
        "exact": values["x2"],
        "exact_xk": values["xk"],
        "asymptote": asym,
        "ratio": values["x2"] / asym,
        "companion_y3": companion,
    }
