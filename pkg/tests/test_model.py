import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubble_tower.errors import ConfigError, InvalidPotentialError
from bubble_tower.model import ModelParams, potential_grad_radial, potential_gradient, potential_value, read_flat_config


def test_defaults():
    P = ModelParams()
    assert (P.N, P.p, P.a1, P.a2, P.m, P.tau) == (3, 3.0, 1.0, 0.0, 5.0, 0.1)
    assert P.m_threshold == 4.0


def test_value_at_origin_and_tail():
    P = ModelParams()
    assert potential_value(P, 0.0) == 2.0
    # remainder is O(r^-10): doubling r divides it by ~2^10. Beyond r ~ 30 the
    # remainder falls below the double-precision resolution of V itself.
    r = np.array([5.0, 10.0, 20.0])
    rem = potential_value(P, r) - 1.0 - r**-5
    ratios = rem[:-1] / rem[1:]
    assert np.allclose(ratios, 2.0**10, rtol=1e-2)
    assert np.all(np.abs(rem) <= 2.0 * r**-10)


def test_tail_consistency():
    P = ModelParams(a2=0.5)
    r = np.geomspace(10, 100, 40)
    dev = np.abs(r**P.m * (potential_value(P, r) - 1.0) - P.a1)
    assert np.all(dev * r <= 1.0)


def test_radial_derivative():
    P = ModelParams()
    assert potential_grad_radial(P, 0.0) == 0.0
    r = np.array([20.0, 40.0, 80.0])
    lead = r ** (P.m + 1) * potential_grad_radial(P, r)
    assert np.all(np.abs(lead + P.a1 * P.m) < 5 * P.m / r**P.m)
    step = 1e-4
    fd = (potential_value(P, 3.0 + step) - potential_value(P, 3.0 - step)) / (2 * step)
    assert abs(fd - potential_grad_radial(P, 3.0)) <= 1e-6 * abs(fd)


@settings(max_examples=50, deadline=None)
@given(
    a1=st.floats(0.1, 5.0),
    a2=st.floats(-0.5, 3.0),
    m=st.floats(4.5, 12.0),
)
def test_derivative_matches_finite_difference(a1, a2, m):
    P = ModelParams(a1=a1, a2=a2, m=m)
    r = np.geomspace(0.1, 100, 60)
    step = 1e-4 * r
    fd = (potential_value(P, r + step) - potential_value(P, r - step)) / (2 * step)
    exact = potential_grad_radial(P, r)
    # O(step^2) truncation relative to the summed term sizes, plus rounding eps V / step
    terms = a1 * m * r ** (m - 1) / (1 + r**m) ** 2 + abs(a2) * (m + 1) * r**m / (1 + r ** (m + 1)) ** 2
    rounding = 4 * np.finfo(float).eps * potential_value(P, r) / step
    assert np.all(np.abs(fd - exact) <= 1e-6 * terms + rounding)


@settings(max_examples=30, deadline=None)
@given(a1=st.floats(0.01, 10.0), m=st.floats(4.1, 20.0))
def test_positive_perturbation(a1, m):
    P = ModelParams(a1=a1, m=m)
    r = np.linspace(0, 50, 501)
    v = potential_value(P, r)
    assert np.all(v >= 1.0)
    # strict wherever the perturbation is representable next to 1
    visible = a1 / (1 + r**m) > 4 * np.finfo(float).eps
    assert np.all(v[visible] > 1.0)


def test_cartesian_gradient():
    P = ModelParams(a2=0.3)
    y = np.array([[1.0, 2.0, -0.5], [0.0, 0.0, 0.0]])
    g = potential_gradient(P, y)
    rho = np.linalg.norm(y[0])
    assert np.allclose(g[0], potential_grad_radial(P, rho) * y[0] / rho, rtol=1e-14, atol=0)
    assert np.all(g[1] == 0.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"p": 1.0},
        {"N": 3, "p": 5.0},
        {"a1": 0.0},
        {"tau": 1.0},
        {"tau": 0.0},
        {"N": 0},
    ],
)
def test_invalid_params(kwargs):
    with pytest.raises(ConfigError):
        ModelParams(**kwargs)


def test_negative_a2_breaking_positivity():
    with pytest.raises(InvalidPotentialError):
        ModelParams(a1=0.1, a2=-5.0)


def test_tail_assumption_checked_for_towers():
    P = ModelParams(m=1.5)
    with pytest.raises(ConfigError, match="m=1.5"):
        P.require_tower()
    with pytest.raises(ConfigError):
        ModelParams().require_tower(min_dim=6)
    ModelParams().require_tower()


def test_config_file(tmp_path):
    path = tmp_path / "model.cfg"
    path.write_text("# model\nN = 3\np=3\n[section]\nm = 6  # inline\ntau=0.2\n")
    assert read_flat_config(path)["m"] == "6"
    P = ModelParams.from_file(path)
    assert (P.N, P.m, P.tau) == (3, 6.0, 0.2)
    assert ModelParams.from_mapping(P.to_dict()) == P
