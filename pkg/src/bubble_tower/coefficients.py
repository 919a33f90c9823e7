"""Interaction coefficients A1, A2, B1 by radial Gauss-Legendre quadrature."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.special import gamma, ive

from .artifacts import write_json
from .errors import ConfigError, QuadratureError
from .profile import RadialProfile

GL_NODES = 16
DEFAULT_PANELS = 64
B1_MAX_REL_ERROR = 1e-4


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere in R^N (2 for N = 1)."""
    return 2.0 * math.pi ** (N / 2.0) / gamma(N / 2.0)


@dataclass(frozen=True)
class CoefficientSet:
    A1: float
    A2: float
    B1: float
    quadrature_error_estimate: float
    N: int
    p: float
    a1: float

    def __post_init__(self):
        for name in ("A1", "A2", "B1"):
            if not getattr(self, name) > 0:
                raise QuadratureError(f"{name} must be positive, got {getattr(self, name)}")

    def scaled(self, c: float) -> "CoefficientSet":
        """(c A1, A2, c B1): the pair entering the stationarity conditions."""
        return CoefficientSet(c * self.A1, self.A2, c * self.B1, self.quadrature_error_estimate, self.N, self.p, self.a1)

    def to_json(self) -> dict:
        d = asdict(self)
        d["err"] = d.pop("quadrature_error_estimate")
        return d

    def save(self, path) -> Path:
        path = Path(path)
        return write_json(self.to_json(), path)

    @classmethod
    def from_json(cls, d) -> "CoefficientSet":
        return cls(d["A1"], d["A2"], d["B1"], d["err"], int(d["N"]), float(d["p"]), float(d["a1"]))


def _panel_rule(r_max: float, panels: int):
    x, w = np.polynomial.legendre.leggauss(GL_NODES)
    edges = np.linspace(0.0, r_max, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _tail_integral(a: float, b: float, R: float) -> float:
    """Leading asymptotics of int_R^inf e^(-a r) r^b dr."""
    return math.exp(-a * R) * R**b / (a - b / R)


def _radial_integral(profile: RadialProfile, weight, panels: int) -> float:
    nodes, weights = _panel_rule(profile.r_max, panels)
    return float(np.sum(weights * weight(nodes)))


def _with_refinement(profile, weight, panels):
    coarse = _radial_integral(profile, weight, panels)
    fine = _radial_integral(profile, weight, 2 * panels)
    return fine, abs(fine - coarse)


def _power_integral(profile: RadialProfile, power: float, panels: int):
    """omega_(N-1) int_0^inf U^power r^(N-1) dr, with the far tail from the C0 asymptote."""
    N = profile.N

    def weight(r):
        return profile.value(r) ** power * r ** (N - 1)

    body, err = _with_refinement(profile, weight, panels)
    # U^q r^(N-1) ~ C0^q e^(-q r) r^((N-1)(1 - q/2))
    tail = profile.C0**power * _tail_integral(power, (N - 1) * (1.0 - power / 2.0), profile.r_max)
    return sphere_area(N) * (body + tail), sphere_area(N) * (err + abs(tail))


def compute_A1(profile: RadialProfile, a1: float, panels: int = DEFAULT_PANELS) -> float:
    if not a1 > 0:
        raise ConfigError(f"a1 must be positive, got {a1}")
    return a1 * _power_integral(profile, 2.0, panels)[0]


def compute_A2(profile: RadialProfile, panels: int = DEFAULT_PANELS) -> float:
    p = profile.p
    return (1.0 - 2.0 / (p + 1.0)) * _power_integral(profile, p + 1.0, panels)[0]


def angular_average(N: int, r):
    """int over S^(N-1) of e^(r cos theta), scaled by e^(-r).

    Equal to (2pi)^(N/2) r^(-(N-2)/2) I_((N-2)/2)(r) e^(-r); for N = 1 the
    "sphere" is two points and the value is 2 cosh(r) e^(-r).
    """
    r = np.asarray(r, dtype=float)
    if N == 1:
        return 1.0 + np.exp(-2.0 * r)
    nu = 0.5 * (N - 2)
    safe = np.where(r > 0, r, 1.0)
    out = (2.0 * math.pi) ** (N / 2.0) * safe ** (-nu) * ive(nu, safe)
    return np.where(r > 0, out, sphere_area(N))


def _b1_parts(profile: RadialProfile, panels: int):
    N, p, C0 = profile.N, profile.p, profile.C0

    def weight(r):
        return profile.value(r) ** p * np.exp(r) * angular_average(N, r) * r ** (N - 1)

    body, err = _with_refinement(profile, weight, panels)
    # U^p e^r r^(N-1) x angular ~ C0^p e^(-(p-1) r) r^((N-1)(1 - p/2) - (N-1)/2) (2pi)^((N-1)/2)
    pref = (2.0 * math.pi) ** ((N - 1) / 2.0) if N > 1 else 1.0
    b = (N - 1) * (1.0 - p / 2.0) - (N - 1) / 2.0
    tail = pref * C0**p * _tail_integral(p - 1.0, b, profile.r_max)
    return C0 * (body + tail), C0 * (err + abs(tail))


def compute_B1(profile: RadialProfile, panels: int = DEFAULT_PANELS) -> float:
    value, err = _b1_parts(profile, panels)
    if err > B1_MAX_REL_ERROR * abs(value):
        raise QuadratureError(f"B1 quadrature error {err:.3g} exceeds {B1_MAX_REL_ERROR:g} relative")
    return value


def compute_coefficients(profile: RadialProfile, a1: float, panels: int = DEFAULT_PANELS) -> CoefficientSet:
    i2, e2 = _power_integral(profile, 2.0, panels)
    ip, ep = _power_integral(profile, profile.p + 1.0, panels)
    b1, eb = _b1_parts(profile, panels)
    if eb > B1_MAX_REL_ERROR * abs(b1):
        raise QuadratureError(f"B1 quadrature error {eb:.3g} exceeds {B1_MAX_REL_ERROR:g} relative")
    pre = 1.0 - 2.0 / (profile.p + 1.0)
    A1, A2 = a1 * i2, pre * ip
    err = max(e2 / i2, ep / ip, eb / b1)
    return CoefficientSet(A1, A2, b1, err, profile.N, profile.p, a1)


def b1_theta_quadrature(profile: RadialProfile, n_theta: int = 200, panels: int = DEFAULT_PANELS) -> float:
    """B1 with the polar angle integrated numerically instead of in closed form (N >= 2)."""
    N, p = profile.N, profile.p
    if N < 2:
        raise ConfigError("the polar-angle form needs N >= 2")
    x, w = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.5 * math.pi * (x + 1.0)
    wt = 0.5 * math.pi * w * np.sin(theta) ** (N - 2)
    lower = sphere_area(N - 1)

    def weight(r):
        ang = np.exp(-r[:, None] * (np.cos(theta)[None, :] + 1.0)) @ wt
        return profile.value(r) ** p * np.exp(r) * ang * r ** (N - 1)

    return profile.C0 * lower * _radial_integral(profile, weight, panels)


def b1_cartesian_2d(profile: RadialProfile, half_width: float = 16.0, spacing: float = 0.02) -> float:
    """Brute-force N = 2 oracle: trapezoid sum of C0 U(|y|)^p e^(-y1) on a square box."""
    if profile.N != 2:
        raise ConfigError("the Cartesian oracle is two-dimensional")
    n = int(round(2 * half_width / spacing)) + 1
    axis = np.linspace(-half_width, half_width, n)
    h = axis[1] - axis[0]
    total = 0.0
    for y2 in axis:
        rho = np.hypot(axis, y2)
        total += float(np.sum(profile.value(rho) ** profile.p * np.exp(-axis)))
    return profile.C0 * total * h * h
