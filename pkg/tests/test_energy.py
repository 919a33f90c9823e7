import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubble_tower.coefficients import CoefficientSet
from bubble_tower.energy import (
    balance_residuals,
    boundary_signs,
    find_critical_point,
    interaction_derivative_check,
    nested_energy,
    printed_gradient,
    reduced_energy,
    reduced_gradient,
    reduced_hessian,
    scaling_relations,
)
from bubble_tower.errors import ConfigError, DegenerateLayerError
from bubble_tower.geometry import TowerConfig, admissible_rectangle, rectangle_center
from bubble_tower.model import ModelParams

# frozen Newton output for N=3, p=3, a1=1, m=5
GOLDEN = {
    1000: (7175.700101617154, 0.00386715889454481),
    10000: (92054.43752929162, 0.00039549215138536215),
    100000: (1119285.9874534858, 4.014900483374915e-05),
    1000000: (13153301.369461603, 4.05897851872397e-06),
}


def by_hand(c, m, k, r, h):
    """Straight transcription of the reduced energy, independent of the module."""
    d = 2 * math.pi * math.sqrt(1 - h * h) * r / k
    e = 2 * r * h
    q = (c.N - 1) / 2
    return k * (c.A1 / r**m + c.A2 - 2 * c.B1 * math.exp(-d) / d**q - c.B1 * math.exp(-e) / e**q)


def test_value_matches_transcription(coeffs3, params):
    for k, (r, h) in GOLDEN.items():
        rep = reduced_energy(coeffs3, params, k, r, h)
        assert rep.value == pytest.approx(by_hand(coeffs3, params.m, k, r, h), rel=1e-13)
        assert sum(rep.terms.values()) == pytest.approx(rep.value, rel=1e-13)
        assert rep.at == (k, r, h)


def test_far_limit_is_kA2(coeffs3, params):
    k = 50
    rep = reduced_energy(coeffs3, params, k, 1e6, 0.5)
    assert rep.value == pytest.approx(k * coeffs3.A2, rel=1e-12)


def test_negligible_interaction_limit(coeffs3, params):
    # at r of a few hundred both exponentials are below 1e-40
    k, r, h = 10, 400.0, 0.4
    rep = reduced_energy(coeffs3, params, k, r, h)
    expected = k * (coeffs3.A1 / r**params.m + coeffs3.A2)
    assert rep.value == pytest.approx(expected, rel=1e-14)
    assert rep.dF_dr == pytest.approx(-k * params.m * coeffs3.A1 / r ** (params.m + 1), rel=1e-12)


def _fd(f, x, eps):
    return (f(x + eps) - f(x - eps)) / (2 * eps)


@settings(max_examples=60, deadline=None)
@given(
    logk=st.floats(1.0, 6.0),
    u=st.floats(0.0, 1.0),
    v=st.floats(0.0, 1.0),
)
def test_gradient_against_central_differences(coeffs3, params, logk, u, v):
    k = int(round(10**logk))
    (r_lo, r_hi), (h_lo, h_hi) = admissible_rectangle(k, params.m)
    r, h = r_lo + u * (r_hi - r_lo), h_lo + v * (h_hi - h_lo)

    def varying(rr, hh, names):
        t = reduced_energy(coeffs3, params, k, rr, hh).terms
        return sum(t[n] for n in names)

    gr, gh = reduced_gradient(coeffs3, params, k, r, h)
    fd_r = _fd(lambda x: varying(x, h, ("self", "neighbor", "layer")), r, 1e-6 * r)
    fd_h = _fd(lambda x: varying(r, x, ("neighbor", "layer")), h, 1e-6 * h)
    t = reduced_energy(coeffs3, params, k, r, h).terms
    scale_r = (abs(t["self"]) + abs(t["neighbor"]) + abs(t["layer"])) / r
    scale_h = (abs(t["neighbor"]) + abs(t["layer"])) / h
    assert abs(gr - fd_r) <= 1e-6 * max(abs(gr), scale_r)
    assert abs(gh - fd_h) <= 1e-6 * max(abs(gh), scale_h)


def test_hessian_against_gradient_differences(coeffs3, params):
    k = 1000
    r, h = GOLDEN[k]
    H = reduced_hessian(coeffs3, params, k, r, h)
    er, eh = 1e-5 * r, 1e-5 * h
    col_r = (np.array(reduced_gradient(coeffs3, params, k, r + er, h)) - reduced_gradient(coeffs3, params, k, r - er, h)) / (2 * er)
    col_h = (np.array(reduced_gradient(coeffs3, params, k, r, h + eh)) - reduced_gradient(coeffs3, params, k, r, h - eh)) / (2 * eh)
    assert np.allclose(H[:, 0], col_r, rtol=1e-6, atol=1e-6 * np.abs(H).max())
    assert np.allclose(H[:, 1], col_h, rtol=1e-6, atol=1e-6 * np.abs(H).max())
    assert H[0, 1] == H[1, 0]


def test_layer_repulsion_as_h_goes_to_zero(coeffs3, params):
    k = 1000
    r, _ = GOLDEN[k]
    for h in (1e-5, 1e-6, 1e-7):
        assert reduced_gradient(coeffs3, params, k, r, h)[1] > 0


def test_sign_change_in_r(coeffs3, params):
    k = 1000
    _, h = GOLDEN[k]
    rs = np.geomspace(0.01, 40000.0, 800)
    signs = np.sign([reduced_gradient(coeffs3, params, k, r, h)[0] for r in rs])
    changes = signs[np.r_[True, signs[1:] != signs[:-1]]]
    # self repulsion, then attraction from the neighbours, then the self term again
    assert changes.tolist() == [-1.0, 1.0, -1.0]


def test_frozen_critical_points(sweep):
    for cp in sweep:
        r, h = GOLDEN[cp.k]
        assert cp.r_star == pytest.approx(r, rel=1e-7)
        assert cp.h_star == pytest.approx(h, rel=1e-7)
        assert cp.grad_residual <= 1e-8
        assert cp.in_interior
        assert cp.boundary_ok


def test_critical_point_trend(sweep, params):
    m = params.m
    r_gap = [abs(cp.r_star / (cp.k * math.log(cp.k)) - m / (2 * math.pi)) for cp in sweep]
    h_gap = [abs(cp.h_star * cp.k - math.pi * (m + 2) / m) for cp in sweep]
    assert all(a > b for a, b in zip(r_gap, r_gap[1:]))
    assert all(a > b for a, b in zip(h_gap, h_gap[1:]))
    assert r_gap[-1] / (m / (2 * math.pi)) < 0.25


@pytest.mark.parametrize("c", [0.5, 2.0, 3.0, 10.0])
def test_scale_invariance(coeffs3, params, c):
    k = 10000
    base = find_critical_point(coeffs3, params, k)
    moved = find_critical_point(coeffs3.scaled(c), params, k)
    assert abs(moved.r_star - base.r_star) <= 1e-10 * base.r_star
    assert abs(moved.h_star - base.h_star) <= 1e-10 * base.h_star


def test_boundary_signs_hold_on_default_rectangle(coeffs3, params):
    for k in (1000, 100000):
        signs = boundary_signs(coeffs3, params, k, admissible_rectangle(k, params.m))
        assert all(signs.values()), signs


def test_boundary_signs_fail_on_shifted_rectangle(coeffs3, params):
    k = 1000
    r, h = GOLDEN[k]
    rect = ((1.5 * r, 2.0 * r), (0.5 * h, 2.0 * h))
    assert not boundary_signs(coeffs3, params, k, rect)["dF_dr_left_positive"]


def test_degenerate_layer(coeffs3, params):
    with pytest.raises(DegenerateLayerError):
        reduced_energy(coeffs3, params, 10, 1e-3, 1e-10)


@pytest.mark.parametrize("r,h", [(0.0, 0.1), (-1.0, 0.1), (10.0, 0.0), (10.0, 1.0)])
def test_outside_domain(coeffs3, params, r, h):
    with pytest.raises(ConfigError):
        reduced_energy(coeffs3, params, 10, r, h)


def test_bad_k(coeffs3, params):
    with pytest.raises(ConfigError):
        reduced_energy(coeffs3, params, 1, 10.0, 0.1)


def test_tail_assumption_enforced(coeffs3):
    with pytest.raises(ConfigError, match="m=3"):
        find_critical_point(coeffs3, ModelParams(m=3.0), 1000)


def test_start_outside_half_strip(coeffs3, params):
    with pytest.raises(ConfigError):
        find_critical_point(coeffs3, params, 1000, rect=((10.0, 20.0), (0.5, 1.5)))


def test_printed_gradient_within_dropped_terms(coeffs3, params):
    dropped = []
    for k, (r, h) in GOLDEN.items():
        rep = reduced_energy(coeffs3, params, k, r, h)
        exact = reduced_gradient(coeffs3, params, k, r, h)
        printed = printed_gradient(coeffs3, params, k, r, h)
        # the printed r-derivative keeps the exponential but drops its algebraic factor
        scale_r = abs(rep.terms["self"]) * params.m / r
        assert abs(exact[0] - printed[0]) <= 3 * rep.dropped_term * scale_r + abs(rep.terms["layer"]) * 2 * h * 2
        dropped.append(rep.dropped_term)
    assert all(a > b for a, b in zip(dropped, dropped[1:]))


# -- nested tower -----------------------------------------------------------------

NESTED = ModelParams(N=6, p=1.5, m=9.0)


@pytest.fixture(scope="module")
def coeffs6():
    # values of the N=6, p=1.5 ground state (a1 = 1)
    return CoefficientSet(132827.30027297648, 66413.65013649566, 169573329.97472227, 0.0, 6, 1.5, 1.0)


def test_nested_offset_is_additive(coeffs6):
    n = 1000
    t, l = rectangle_center(n, NESTED.m)
    plain, cp0 = nested_energy(coeffs6, NESTED, n, t, l)
    shifted, cp1 = nested_energy(coeffs6, NESTED, n, t, l, offset=-123.25)
    assert shifted.value == plain.value - 123.25
    assert shifted.offset == -123.25
    assert (shifted.dF_dr, shifted.dF_dh) == (plain.dF_dr, plain.dF_dh)
    assert (cp0.r_star, cp0.h_star) == (cp1.r_star, cp1.h_star)


def test_nested_trend(coeffs6):
    m = NESTED.m
    r_gap, h_gap = [], []
    for n in (1000, 10000, 100000, 1000000):
        _, cp = nested_energy(coeffs6, NESTED, n, *rectangle_center(n, m))
        assert cp.in_interior and cp.grad_residual <= 1e-8
        r_gap.append(abs(cp.r_star / (n * math.log(n)) - m / (2 * math.pi)))
        h_gap.append(abs(cp.h_star * n - math.pi * (m + 2) / m))
    assert all(a > b for a, b in zip(r_gap, r_gap[1:]))
    assert all(a > b for a, b in zip(h_gap, h_gap[1:]))


def test_nested_needs_six_dimensions(coeffs3, params):
    with pytest.raises(ConfigError, match="N >= 6"):
        nested_energy(coeffs3, params, 100, 10.0, 0.1)


def test_nested_needs_tail_assumption(coeffs6):
    with pytest.raises(ConfigError, match="assumption"):
        nested_energy(coeffs6, ModelParams(N=6, p=1.5, m=7.0), 100, 10.0, 0.1)


# -- balance, scaling, interaction -----------------------------------------------


def test_balance_flags_flat_tower(bubble3, coeffs3, params):
    out = balance_residuals(bubble3, coeffs3, params, TowerConfig(k=100, r=500.0, h=0.0))
    assert math.isnan(out["ratio_layer_literal"]) and math.isnan(out["ratio_layer_stationary"])
    assert math.isfinite(out["ratio_neighbor_literal"])


def test_balance_literal_vs_stationary(bubble3, coeffs3, params, sweep_configs):
    m = params.m
    for cfg in sweep_configs:
        out = balance_residuals(bubble3, coeffs3, params, cfg)
        assert out["ratio_neighbor_literal"] / out["ratio_neighbor_stationary"] == pytest.approx((m + 1) / (2 * m), rel=1e-14)


def test_balance_numerator_scaling(bubble3, coeffs3, params):
    cfg = TowerConfig(k=1000, r=7000.0, h=0.004)
    far = TowerConfig(k=1000, r=14000.0, h=0.004)
    a = balance_residuals(bubble3, coeffs3, params, cfg)
    b = balance_residuals(bubble3, coeffs3, params, far)
    # with the attraction side held fixed the force numerator drops by 2^(m+1)
    ratio_att = bubble3.value(2 * 14000 * math.sqrt(1 - 0.004**2) * math.sin(math.pi / 1000)) / bubble3.value(
        2 * 7000 * math.sqrt(1 - 0.004**2) * math.sin(math.pi / 1000)
    )
    got = b["ratio_neighbor_stationary"] / a["ratio_neighbor_stationary"]
    assert got * ratio_att == pytest.approx(2.0 ** -(params.m + 1), rel=1e-12)


def test_balance_ratios_bounded(bubble3, coeffs3, params, sweep_configs):
    for cfg in sweep_configs:
        out = balance_residuals(bubble3, coeffs3, params, cfg)
        assert all(0.1 <= v <= 10 for v in out.values()), out


def test_scaling_band(bubble3, params, sweep_configs):
    dom = []
    for cfg in sweep_configs:
        out = scaling_relations(bubble3, params, cfg)
        assert out["in_band"], out
        dom.append(out["dominance"])
    assert all(a < b for a, b in zip(dom, dom[1:]))


def test_scaling_band_breaks_away_from_critical_point(bubble3, params, sweep_configs):
    cfg = sweep_configs[0]
    out = scaling_relations(bubble3, params, TowerConfig(cfg.k, 2 * cfg.r, cfg.h))
    assert not out["in_band"]


def test_interaction_asymptote(bubble3, params, sweep_configs):
    gaps = []
    for cfg in sweep_configs:
        out = interaction_derivative_check(bubble3, cfg)
        assert out["exact_xk"] == pytest.approx(out["exact"], rel=1e-9)
        assert abs(out["companion_y3"]) <= 1e-12
        gaps.append(abs(out["ratio"] - 1.0))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[0] <= 0.25


def test_interaction_needs_large_k(bubble3):
    with pytest.raises(ConfigError):
        interaction_derivative_check(bubble3, TowerConfig(k=4, r=10.0, h=0.1))
