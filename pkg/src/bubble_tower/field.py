"""Approximate solution W = sum of bubbles, its residual l_k and the weighted sup norm."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress, qmc

from .geometry import TowerConfig, tower_points
from .model import ModelParams, potential_excess
from .profile import RadialProfile

RAY_RADII = (0.0, 0.125, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0)
SEGMENT_FRACTIONS = 17
FILL_POINTS = 512


@dataclass(frozen=True)
class StarNormReport:
    value: float
    argmax_point: np.ndarray
    tau: float
    sample_count: int


def _as_points(y, dim=None):
    y = np.asarray(y, dtype=float)
    return y[None, :] if y.ndim == 1 else y


def sum_of_bubbles(profile: RadialProfile, centers, y, gradient: bool = False):
    """sum_c U(|y - c|) at one point or a stack of points; optionally with its gradient."""
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.size == 0:
        raise ValueError("need at least one center")
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    pts = _as_points(y)
    z = pts[:, None, :] - centers[None, :, :]
    rho = np.linalg.norm(z, axis=-1)
    u, du, _ = profile.eval(rho.ravel())
    value = u.reshape(rho.shape).sum(axis=1)
    if not gradient:
        return float(value[0]) if single else value
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(rho[..., None] > 0, z / rho[..., None], 0.0)
    grad = (du.reshape(rho.shape)[..., None] * unit).sum(axis=1)
    if single:
        return float(value[0]), grad[0]
    return value, grad


def residual_lk(profile: RadialProfile, params: ModelParams, cfg, y, centers=None):
    """-(V - 1) sum U_c + (W^p - sum U_c^p); ``centers`` overrides the tower of ``cfg``."""
    if centers is None:
        centers = tower_points(cfg)
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    pts = _as_points(y)
    rho = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=-1)
    u = profile.value(rho.ravel()).reshape(rho.shape)
    W = u.sum(axis=1)
    p = profile.p
    out = -potential_excess(params, np.linalg.norm(pts, axis=1)) * W + (W**p - (u**p).sum(axis=1))
    return float(out[0]) if single else out


def potential_part(profile, params, cfg, y):
    """Only the -(V - 1) W piece of the residual."""
    pts = _as_points(y)
    W = sum_of_bubbles(profile, tower_points(cfg), pts)
    return -potential_excess(params, np.linalg.norm(pts, axis=1)) * W


def star_weight(centers, y, tau):
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    pts = _as_points(y)
    rho = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=-1)
    return np.exp(-tau * rho).sum(axis=1)


def structured_samples(centers, level: int = 0, seed: int = 0) -> np.ndarray:
    """Rays around every center, neighbour segments, origin-to-center segments and a Sobol fill.

    Level ``L + 1`` contains every point of level ``L``.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    dim = centers.shape[1]
    active = min(dim, 3)
    radii = np.asarray(RAY_RADII)
    for _ in range(level):
        radii = np.union1d(radii, 0.5 * (radii[1:] + radii[:-1]))
    dirs = []
    for i in range(active):
        e = np.zeros(dim)
        e[i] = 1.0
        dirs.extend([e, -e])
    dirs = np.array(dirs)
    chunks = []
    norms = np.linalg.norm(centers, axis=1)
    for c, n in zip(centers, norms):
        local = dirs if n == 0 else np.vstack([dirs, c / n, -c / n])
        chunks.append((c[None, None, :] + radii[None, :, None] * local[:, None, :]).reshape(-1, dim))
    fracs = np.linspace(0.0, 1.0, (SEGMENT_FRACTIONS - 1) * 2**level + 1)
    chunks.append((fracs[:, None, None] * centers[None, :, :]).reshape(-1, dim))
    # segments to the nearest other center
    if len(centers) > 1:
        dist = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
        np.fill_diagonal(dist, np.inf)
        partners = np.argmin(dist, axis=1)
        for c, j in zip(centers, partners):
            chunks.append(c[None, :] + fracs[:, None] * (centers[j] - c)[None, :])
    span = 1.2 * max(float(norms.max()), 1.0) + RAY_RADII[-1]
    sobol = qmc.Sobol(d=active, scramble=True, seed=seed)
    fill = np.zeros((FILL_POINTS * 2**level, dim))
    fill[:, :active] = qmc.scale(sobol.random(FILL_POINTS * 2**level), -span, span)
    chunks.append(fill)
    pts = np.unique(np.vstack(chunks), axis=0)  # also sorts lexicographically
    return pts


def star_norm(evaluator, centers, tau: float, sampling=None) -> StarNormReport:
    """max |f(y)| / sum_c e^(-tau |y - c|) over a sample set (array, callable or None)."""
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    if sampling is None:
        pts = structured_samples(centers)
    elif callable(sampling):
        pts = sampling(centers)
    else:
        pts = np.atleast_2d(np.asarray(sampling, dtype=float))
    # lexicographic order fixes the tie-break
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    f = np.abs(np.asarray(evaluator(pts), dtype=float))
    ratio = f / star_weight(centers, pts, tau)
    i = int(np.argmax(ratio))
    return StarNormReport(value=float(ratio[i]), argmax_point=pts[i], tau=tau, sample_count=len(pts))


def lk_star_norm(profile, params, cfg: TowerConfig, sampling=None) -> StarNormReport:
    centers = tower_points(cfg)
    return star_norm(lambda y: residual_lk(profile, params, cfg, y, centers), centers, params.tau, sampling)


def lk_decay_sweep(profile, params, k_list, coeffs=None, configs=None, sampling=None) -> dict:
    """log-log slope of ||l_k||_* over k at the critical configurations."""
    from .coefficients import compute_coefficients
    from .energy import config_at, find_critical_point

    k_list = [int(k) for k in k_list]
    if len(k_list) < 4:
        raise ValueError("need at least four values of k")
    if configs is None:
        coeffs = coeffs or compute_coefficients(profile, params.a1)
        configs = [config_at(find_critical_point(coeffs, params, k), params.N) for k in k_list]
    reports = [lk_star_norm(profile, params, cfg, sampling) for cfg in configs]
    values = np.array([rep.value for rep in reports])
    fit = linregress(np.log(k_list), np.log(values))
    bound = min(params.p / 2.0 - params.tau, 1.0) * params.m
    return {
        "k": k_list,
        "star_norm": values.tolist(),
        "argmax": [rep.argmax_point.tolist() for rep in reports],
        "slope": float(fit.slope),
        "slope_stderr": float(fit.stderr),
        "intercept": float(fit.intercept),
        "exponent_bound": bound,
        "configs": [(cfg.k, cfg.r, cfg.h) for cfg in configs],
    }
