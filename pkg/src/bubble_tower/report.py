"""End-to-end pipeline: every acceptance metric in one summary dictionary.

Each ``check_*`` function is self-contained and returns a dict with a boolean
``passed`` plus the numbers behind it; :func:`run_report` strings them together
and reuses profiles and critical points where the checks share them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import b1_cartesian_2d, b1_theta_quadrature, compute_coefficients
from .energy import (
    balance_residuals,
    config_at,
    find_critical_point,
    interaction_derivative_check,
    reduced_energy,
    reduced_gradient,
    scaling_relations,
)
from .field import lk_decay_sweep, structured_samples
from .geometry import admissible_rectangle
from .model import ModelParams
from .pohozaev import GridField, convergence_table, gaussian_field
from .profile import plateau_variation, solve_ground_state
from .spectrum import near_kernel_decay, nondegeneracy_check

TREND_K = (1000, 10000, 100000, 1000000)
INTERACTION_K = (50, 100, 1000, 10000, 100000, 1000000)
LK_K = (8, 16, 32, 64)
TOY_SEPARATIONS = (4.0, 6.0, 8.0, 10.0)
POHOZAEV_SPACINGS = (0.1, 0.05, 0.025)


@dataclass
class ReportOptions:
    trend_k: tuple = TREND_K
    interaction_k: tuple = INTERACTION_K
    lk_k: tuple = LK_K
    toy_separations: tuple = TOY_SEPARATIONS
    pohozaev_spacings: tuple = POHOZAEV_SPACINGS
    gradient_samples: int = 100
    seed: int = 0


def _monotone(seq, increasing: bool) -> bool:
    diffs = np.diff(np.asarray(seq, dtype=float))
    return bool(np.all(diffs > 0) if increasing else np.all(diffs < 0))


# 1
def check_profile_exactness() -> dict:
    rows = {}
    ok = True
    for p, u0, c0 in ((3.0, math.sqrt(2.0), 2.0 * math.sqrt(2.0)), (2.0, 1.5, 6.0)):
        prof = solve_ground_state(1, p)
        err_u = abs(prof.shoot_value - u0)
        err_c = abs(prof.C0 - c0) / c0
        rows[f"p={p:g}"] = {"U0": prof.shoot_value, "C0": prof.C0, "U0_error": err_u, "C0_rel_error": err_c}
        ok = ok and err_u <= 1e-6 and err_c <= 1e-5
    return {"passed": ok, "cases": rows}


# 2
def check_decay_law(profile) -> dict:
    var = plateau_variation(profile)
    return {"passed": var <= 5e-3, "plateau_variation": var, "C0": profile.C0, "r_match": profile.r_match}


# 3
def check_coefficients(profile, a1: float = 1.0) -> dict:
    line = solve_ground_state(1, 3.0)
    A1_line = compute_coefficients(line, 1.0).A1
    coarse = compute_coefficients(profile, a1, panels=64)
    fine = compute_coefficients(profile, a1, panels=128)
    refine = max(abs(getattr(fine, n) - getattr(coarse, n)) / abs(getattr(fine, n)) for n in ("A1", "A2", "B1"))
    plane = solve_ground_state(2, 3.0)
    theta = b1_theta_quadrature(plane)
    cart = b1_cartesian_2d(plane)
    oracle = abs(theta - cart) / abs(cart)
    return {
        "passed": abs(A1_line - 4.0) <= 1e-6 and refine < 1e-5 and oracle <= 1e-3,
        "A1_line": A1_line,
        "A1_line_error": abs(A1_line - 4.0),
        "refinement_rel_change": refine,
        "B1_theta": theta,
        "B1_cartesian": cart,
        "B1_oracle_rel_diff": oracle,
        "coefficients": fine.to_json(),
    }


def gradient_fd_errors(coeffs, params: ModelParams, samples: int = 100, seed: int = 0) -> np.ndarray:
    """Relative FD mismatch of the exact gradient at random admissible (k, r, h).

    Each partial derivative differences only the terms that depend on that
    variable (k A2 never does, the self term has no h); otherwise the tiny
    interaction terms drown in the rounding of the large ones. The mismatch is
    measured against the summed magnitudes of the per-term derivatives.
    """
    rng = np.random.default_rng(seed)
    errs = []
    for _ in range(samples):
        k = int(round(10 ** rng.uniform(1.0, 6.0)))
        (r_lo, r_hi), (h_lo, h_hi) = admissible_rectangle(k, params.m)
        r, h = rng.uniform(r_lo, r_hi), rng.uniform(h_lo, h_hi)

        def partial_sum(rr, hh, names):
            terms = reduced_energy(coeffs, params, k, rr, hh).terms
            return sum(terms[n] for n in names)

        r_terms, h_terms = ("self", "neighbor", "layer"), ("neighbor", "layer")
        gr, gh = reduced_gradient(coeffs, params, k, r, h)
        er, eh = 1e-6 * r, 1e-6 * h
        fd_r = (partial_sum(r + er, h, r_terms) - partial_sum(r - er, h, r_terms)) / (2 * er)
        fd_h = (partial_sum(r, h + eh, h_terms) - partial_sum(r, h - eh, h_terms)) / (2 * eh)
        rep = reduced_energy(coeffs, params, k, r, h)
        scale_r = sum(abs(v) for n, v in rep.terms.items() if n != "constant") / r
        scale_h = sum(abs(v) for n, v in rep.terms.items() if n not in ("constant", "self")) / h
        errs.append(max(abs(gr - fd_r) / max(abs(gr), scale_r), abs(gh - fd_h) / max(abs(gh), scale_h)))
    return np.array(errs)


# 4
def check_gradient(coeffs, params, samples: int = 100, seed: int = 0) -> dict:
    errs = gradient_fd_errors(coeffs, params, samples, seed)
    return {"passed": bool(np.max(errs) <= 1e-6), "max_rel_error": float(np.max(errs)), "samples": samples}


# 5
def check_trend(critical_points, params) -> dict:
    m = params.m
    ks = [cp.k for cp in critical_points]
    r_norm = [cp.r_star / (cp.k * math.log(cp.k)) for cp in critical_points]
    h_norm = [cp.h_star * cp.k for cp in critical_points]
    r_lim, h_lim = m / (2.0 * math.pi), math.pi * (m + 2.0) / m
    r_gap = [abs(x - r_lim) for x in r_norm]
    h_gap = [abs(x - h_lim) for x in h_norm]
    resid = [cp.grad_residual for cp in critical_points]
    signs = [cp.boundary_ok for cp in critical_points]
    interior = [cp.in_interior for cp in critical_points]
    r_mono = _monotone(r_gap, False) and (_monotone(r_norm, False) or _monotone(r_norm, True))
    h_mono = _monotone(h_gap, False) and (_monotone(h_norm, False) or _monotone(h_norm, True))
    passed = r_mono and h_mono and max(resid) <= 1e-8 and all(signs) and all(interior)
    return {
        "passed": passed,
        "k": ks,
        "r_over_klnk": r_norm,
        "h_times_k": h_norm,
        "r_limit": r_lim,
        "h_limit": h_lim,
        "grad_residual": resid,
        "boundary_signs_ok": signs,
        "in_interior": interior,
    }


# 6
def check_scaling(profile, params, configs) -> dict:
    rows = [scaling_relations(profile, params, cfg) for cfg in configs]
    dom = [row["dominance"] for row in rows]
    passed = all(row["in_band"] for row in rows) and min(dom) > 1.0 and _monotone(dom, True)
    return {
        "passed": passed,
        "ratio_neighbor": [row["ratio_neighbor"] for row in rows],
        "ratio_layer": [row["ratio_layer"] for row in rows],
        "dominance": dom,
    }


# 7
def check_lk_decay(profile, params, coeffs, k_list=LK_K, seed: int = 0) -> dict:
    sweep = lk_decay_sweep(profile, params, k_list, coeffs=coeffs, sampling=lambda c: structured_samples(c, seed=seed))
    threshold = -0.9 * sweep["exponent_bound"]
    sweep["threshold"] = threshold
    sweep["passed"] = sweep["slope"] <= threshold
    return sweep


def gaussian_pair(spacing: float):
    """The manufactured (u, xi) pair used for the Pohozaev convergence study."""
    lower, upper = [0.4, -0.9, -0.8], [2.4, 0.9, 1.0]
    u_val, u_grad = gaussian_field([1.3, 0.2, -0.1], 0.45, 1.2)
    x_val, x_grad = gaussian_field([1.6, -0.3, 0.25], 0.5, 0.8)
    u = GridField.from_function(u_val, lower, upper, spacing, gradient=u_grad)
    xi = GridField.from_function(x_val, lower, upper, spacing, gradient=x_grad)
    return u, xi


# 8
def check_pohozaev(params, p: float = 3.0, spacings=POHOZAEV_SPACINGS) -> dict:
    tables = {}
    ok = True
    for j in (1, 2, 3):
        rows = convergence_table(gaussian_pair, params, p, j, spacings)
        ratios = [row["ratio"] for row in rows if "ratio" in row]
        ok = ok and all(3.5 <= q <= 4.5 for q in ratios)
        tables[f"j={j}"] = {"spacing": [row["spacing"] for row in rows], "residual": [row["residual"] for row in rows], "ratio": ratios}
    return {"passed": ok, "tables": tables}


# 9
def check_nondegeneracy(profile) -> dict:
    out = nondegeneracy_check(profile)
    reps = out["reports"]
    l0 = np.asarray(reps[0].lowest_eigenvalues)
    return {
        "passed": out["verdict"] == "PASS" and bool(np.all(np.abs(l0[l0 > -1e-4]) >= 1e-3)),
        "verdict": out["verdict"],
        "failures": out["failures"],
        "sectors": {str(ell): rep.lowest_eigenvalues for ell, rep in reps.items()},
        "negative_count": {str(ell): rep.negative_count for ell, rep in reps.items()},
        "l1_alignment": reps[1].zero_mode_alignment,
    }


# 10
def check_interaction(profile, configs) -> dict:
    rows = [interaction_derivative_check(profile, cfg) for cfg in configs]
    ratios = [row["ratio"] for row in rows]
    gaps = [abs(q - 1.0) for q in ratios]
    comp = max(abs(row["companion_y3"]) for row in rows)
    passed = gaps[0] <= 0.25 and _monotone(gaps, False) and comp <= 1e-12
    return {"passed": passed, "k": [cfg.k for cfg in configs], "ratio": ratios, "max_companion_y3": comp}


# 11
def check_balance(profile, coeffs, params, configs) -> dict:
    rows = [balance_residuals(profile, coeffs, params, cfg) for cfg in configs]
    out = {"k": [cfg.k for cfg in configs]}
    ok = True
    for key in sorted(rows[0]):
        vals = np.array([row[key] for row in rows])
        variation = float(vals.max() / vals.min() - 1.0)
        out[key] = vals.tolist()
        out[f"{key}_variation"] = variation
        ok = ok and bool(np.all(np.isfinite(vals))) and 0.1 <= vals.min() and vals.max() <= 10 and variation < 0.5
    out["passed"] = ok
    return out


# 12
def check_toy(separations=TOY_SEPARATIONS, p: float = 3.0) -> dict:
    out = near_kernel_decay(p, separations)
    out["passed"] = min(out["r_squared"]) >= 0.98
    return out


def critical_sweep(coeffs, params, ks):
    return [find_critical_point(coeffs, params, int(k)) for k in ks]


def run_report(params: ModelParams, options: ReportOptions | None = None) -> dict:
    """Every acceptance metric; criterion 13 is checked by rerunning and comparing digests."""
    options = options or ReportOptions()
    params.require_tower()
    profile = solve_ground_state(params.N, params.p)
    coeffs = compute_coefficients(profile, params.a1)
    trend = critical_sweep(coeffs, params, options.trend_k)
    trend_cfgs = [config_at(cp, params.N) for cp in trend]
    inter_cps = critical_sweep(coeffs, params, options.interaction_k)
    summary = {
        "model": params.to_dict(),
        "01_profile_exactness": check_profile_exactness(),
        "02_decay_law": check_decay_law(profile),
        "03_coefficients": check_coefficients(profile, params.a1),
        "04_gradient": check_gradient(coeffs, params, options.gradient_samples, options.seed),
        "05_critical_trend": check_trend(trend, params),
        "06_scaling": check_scaling(profile, params, trend_cfgs),
        "07_lk_decay": check_lk_decay(profile, params, coeffs, options.lk_k, options.seed),
        "08_pohozaev": check_pohozaev(params, params.p, options.pohozaev_spacings),
        "09_nondegeneracy": check_nondegeneracy(profile),
        "10_interaction": check_interaction(profile, [config_at(cp, params.N) for cp in inter_cps]),
        "11_balance": check_balance(profile, coeffs, params, trend_cfgs),
        "12_toy_tower": check_toy(options.toy_separations, params.p),
    }
    summary["critical_points"] = [
        {"k": cp.k, "r": cp.r_star, "h": cp.h_star, "grad_residual": cp.grad_residual, "in_interior": cp.in_interior}
        for cp in trend
    ]
    return summary
