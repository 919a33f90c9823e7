"""Radial ground state of -U'' - (N-1)/r U' + U = U^p by shooting on U(0).

The forward shot is only trustworthy while the bisection bracket keeps the
two bounding trajectories together; past that radius the profile is
continued by integrating inward from ``r_max`` along the decaying solution
of the linearised far-field equation, whose amplitude is fixed by matching
U at ``r_match``.  Beyond ``r_max`` the analytic tail is used.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly
from scipy.optimize import brentq
from scipy.special import kve

from .artifacts import write_json
from .errors import ConfigError, IntegrationError, NoGroundStateError, TailNotConvergedError

SERIES_RADIUS = 1e-4
MATCH_CRITERION = 5e-3
# bracket spreads tried in turn; a tighter spread keeps the forward shot off the growing mode
TRUST_TOLERANCES = (1e-10, 1e-9, 1e-8)
PLATEAU_TOLERANCE = 0.01
# far below the forward-shot error at r_match
INWARD_MATCH_TOL = 1e-13
BRACKET_DOUBLINGS = 12


def soliton_1d(p: float, x):
    """Closed-form even ground state on the line: ((p+1)/2)^(1/(p-1)) sech^(2/(p-1))((p-1)x/2)."""
    z = np.abs(0.5 * (p - 1.0) * np.asarray(x, dtype=float))
    sech = 2.0 * np.exp(-z) / (1.0 + np.exp(-2.0 * z))
    return ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0)) * sech ** (2.0 / (p - 1.0))


def tail_shape(N: int, r):
    """Decaying solution of the free radial equation, normalised to e^-r r^-(N-1)/2 at infinity.

    Returns (T, T', T''). For N = 1 and N = 3 this is exactly e^-r r^-(N-1)/2.
    """
    r = np.asarray(r, dtype=float)
    nu = 0.5 * (N - 2)
    pref = math.sqrt(2.0 / math.pi) * r ** (-nu) * np.exp(-r)
    t0 = pref * kve(nu, r)
    t1 = -pref * kve(nu + 1.0, r)
    t2 = t0 - (N - 1) / r * t1
    return t0, t1, t2


def _check_exponent(N: int, p: float) -> None:
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    if not p > 1:
        raise ConfigError(f"p must exceed 1, got {p}")
    if N >= 3 and not p < (N + 2) / (N - 2):
        raise ConfigError(f"p={p} is supercritical for N={N}")


def _rhs(N: int, p: float):
    c = N - 1.0

    def f(r, y):
        u, du = y
        return [du, -c / r * du + u - abs(u) ** (p - 1.0) * u]

    return f


def _series_start(N: int, p: float, s: float, r0: float):
    a = (s - s**p) / (2.0 * N)
    return [s + a * r0 * r0, 2.0 * a * r0]


def _shoot(N, p, s, r_max, rtol, atol, dense=False, terminal=True):
    """Integrate from the origin; returns (classification, solution)."""

    def crossed_zero(r, y):
        return y[0]

    def turned_up(r, y):
        return y[1]

    crossed_zero.terminal = terminal
    crossed_zero.direction = -1
    turned_up.terminal = terminal
    turned_up.direction = 1

    sol = solve_ivp(
        _rhs(N, p),
        (SERIES_RADIUS, r_max),
        _series_start(N, p, s, SERIES_RADIUS),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        events=(crossed_zero, turned_up),
        dense_output=dense,
    )
    if sol.status == -1:
        raise IntegrationError(f"ODE integration failed at U(0)={s}: {sol.message}")
    hit_zero = sol.t_events[0].size > 0
    hit_turn = sol.t_events[1].size > 0
    if hit_zero and (not hit_turn or sol.t_events[0][0] < sol.t_events[1][0]):
        return "high", sol
    return "low", sol


def _quintic_hermite(x, y, dy, d2y) -> BPoly:
    """Piecewise quintic matching value, slope and curvature at every node.

    Same interpolant as ``BPoly.from_derivatives`` with three orders per node,
    with the Bernstein coefficients written down directly.
    """
    h = np.diff(x)
    c = np.empty((6, h.size))
    c[0] = y[:-1]
    c[1] = y[:-1] + h * dy[:-1] / 5.0
    c[2] = y[:-1] + 2.0 * h * dy[:-1] / 5.0 + h * h * d2y[:-1] / 20.0
    c[3] = y[1:] - 2.0 * h * dy[1:] / 5.0 + h * h * d2y[1:] / 20.0
    c[4] = y[1:] - h * dy[1:] / 5.0
    c[5] = y[1:]
    return BPoly(c, x)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    N: int
    p: float
    grid: np.ndarray
    U: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    C0: float
    r_match: float
    shoot_value: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        # quintic Hermite pieces: U from U, U1, U2 and U' from U1, U2, U3
        U3 = _ode_third_derivative(self.N, self.p, self.grid, self.U, self.U1, self.U2)
        object.__setattr__(self, "_spline", _quintic_hermite(self.grid, self.U, self.U1, self.U2))
        object.__setattr__(self, "_dspline", _quintic_hermite(self.grid, self.U1, self.U2, U3))

    @property
    def r_max(self) -> float:
        return float(self.grid[-1])

    def eval(self, r):
        """Return (U, U', U'') at radii ``r`` (scalar or array)."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        if np.any(r < 0):
            raise ValueError("profile evaluation needs r >= 0")
        u = np.empty_like(r)
        du = np.empty_like(r)
        d2u = np.empty_like(r)
        inner = r <= self.r_max
        if np.any(inner):
            ri = r[inner]
            u[inner] = self._spline(ri)
            du[inner] = self._dspline(ri)
            ui, dui = u[inner], du[inner]
            pos = ri > 0
            d2 = np.full_like(ri, self.U2[0])
            d2[pos] = -(self.N - 1) / ri[pos] * dui[pos] + ui[pos] - np.abs(ui[pos]) ** (self.p - 1) * ui[pos]
            d2u[inner] = d2
        outer = ~inner
        if np.any(outer):
            t0, t1, t2 = tail_shape(self.N, r[outer])
            u[outer] = self.C0 * t0
            du[outer] = self.C0 * t1
            d2u[outer] = self.C0 * t2
        if scalar:
            return float(u[0]), float(du[0]), float(d2u[0])
        return u, du, d2u

    def value(self, r):
        return self.eval(r)[0]

    def plateau(self):
        """U / tail_shape on [r_match, r_max]; flat at C0 once the tail has converged."""
        sel = self.grid >= self.r_match
        return self.grid[sel], self.U[sel] / tail_shape(self.N, self.grid[sel])[0]

    # CSV + JSON sidecar
    def save(self, csv_path) -> Path:
        csv_path = Path(csv_path)
        data = np.column_stack([self.grid, self.U, self.U1, self.U2])
        np.savetxt(csv_path, data, delimiter=",", header="r,U,U1,U2", comments="", fmt="%.17g")
        sidecar = {
            "N": self.N,
            "p": self.p,
            "C0": self.C0,
            "r_match": self.r_match,
            "shoot_value": self.shoot_value,
        }
        json_path = csv_path.with_suffix(".json")
        return write_json(sidecar, json_path)

    @classmethod
    def load(cls, csv_path) -> "RadialProfile":
        csv_path = Path(csv_path)
        data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
        meta = json.loads(csv_path.with_suffix(".json").read_text())
        return cls(
            N=int(meta["N"]),
            p=float(meta["p"]),
            grid=data[:, 0],
            U=data[:, 1],
            U1=data[:, 2],
            U2=data[:, 3],
            C0=float(meta["C0"]),
            r_match=float(meta["r_match"]),
            shoot_value=float(meta["shoot_value"]),
        )


def eval_profile(profile: RadialProfile, r):
    return profile.eval(r)


def _ode_second_derivative(N, p, r, u, du, s):
    d2u = np.empty_like(u)
    pos = r > 0
    d2u[pos] = -(N - 1) / r[pos] * du[pos] + u[pos] - np.abs(u[pos]) ** (p - 1) * u[pos]
    d2u[~pos] = (s - s**p) / N
    return d2u


def _ode_third_derivative(N, p, r, u, du, d2u):
    """Derivative of the radial ODE; U is even, so the third derivative vanishes at 0."""
    d3u = np.zeros_like(u)
    pos = r > 0
    rp = r[pos]
    d3u[pos] = (
        (N - 1) / rp**2 * du[pos]
        - (N - 1) / rp * d2u[pos]
        + du[pos]
        - p * np.abs(u[pos]) ** (p - 1) * du[pos]
    )
    return d3u


def _bisect(N, p, tol, rtol, atol, r_max):
    lo = 1.0
    hi = 10.0 * ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0))
    # near the critical exponent U(0) outgrows the default bracket; widen geometrically
    for _ in range(BRACKET_DOUBLINGS):
        if _shoot(N, p, hi, r_max, 1e-6, atol)[0] == "high":
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NoGroundStateError(f"no U(0) up to {hi:g} crosses zero (N={N}, p={p})")

    def signal(v):
        # a shot leaves the separatrix at R ~ -log|v - U(0)| / 2, so this is nearly linear through the root
        cls, sol = _shoot(N, p, v, r_max, rtol, atol)
        return math.copysign(math.exp(-2.0 * sol.t[-1]), 1.0 if cls == "high" else -1.0)

    root, info = brentq(signal, lo, hi, xtol=0.25 * tol, rtol=4.0 * np.finfo(float).eps, full_output=True)
    iterations = info.function_calls
    # walk out from the root until both sides classify; plain bisection finishes the job
    for side, want in ((-1.0, "low"), (1.0, "high")):
        step = 0.5 * tol
        while lo < root + side * step < hi:
            v = root + side * step
            iterations += 1
            if _shoot(N, p, v, r_max, rtol, atol)[0] == want:
                lo, hi = (v, hi) if want == "low" else (lo, v)
                break
            lo, hi = (lo, v) if want == "low" else (v, hi)
            step *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        # far from the separatrix a loose tolerance classifies just as reliably
        loose = min(1e-6, max(rtol, 1e-3 * (hi - lo)))
        if _shoot(N, p, mid, r_max, loose, atol)[0] == "high":
            hi = mid
        else:
            lo = mid
        iterations += 1
        if iterations > 200:
            raise NoGroundStateError("bisection did not terminate")
    return lo, hi, iterations


def solve_ground_state(
    N: int,
    p: float,
    tol: float = 1e-14,
    r_max: float = 30.0,
    dr: float = 0.01,
    rtol: float = 1e-12,
    atol: float = 1e-15,
) -> RadialProfile:
    """Positive radial ground state by bisection on the shooting value U(0)."""
    _check_exponent(N, p)
    if tol <= 0:
        raise ConfigError("tol must be positive")
    lo, hi, iterations = _bisect(N, p, tol, rtol, atol, r_max)
    s = 0.5 * (lo + hi)

    grid = np.linspace(0.0, r_max, int(round(r_max / dr)) + 1)

    # radius up to which the bracketing trajectories stay together
    sols = [_shoot(N, p, v, r_max, rtol, atol, dense=True)[1] for v in (lo, s, hi)]
    r_common = min(sol.t[-1] for sol in sols)
    probe = grid[(grid >= SERIES_RADIUS) & (grid <= r_common)]
    ulo, umid, uhi = (sol.sol(probe) for sol in sols)
    spread = np.abs(uhi[0] - ulo[0]) / np.abs(umid[0])

    # log-derivative against the free tail; for N = 1, 3 this is -1 - (N-1)/(2r) exactly
    t0, t1, _ = tail_shape(N, np.maximum(probe, 1e-3))
    crit = np.abs(umid[1] / umid[0] - t1 / t0)
    for trust_tol in TRUST_TOLERANCES:
        bad = np.nonzero(spread > trust_tol)[0]
        r_trust = probe[bad[0] - 1] if bad.size else probe[-1]
        ok = (crit < MATCH_CRITERION) & (probe <= min(r_trust, r_max - 5.0)) & (umid[0] > 0)
        if np.any(ok):
            break
    else:
        raise TailNotConvergedError(
            f"no radius where the forward shot is trustworthy and asymptotic (trust radius {r_trust:.2f});"
            " tighten tol or rtol"
        )
    r_match = float(probe[np.nonzero(ok)[0][-1]])

    fwd = grid[grid <= r_match]
    u_f = np.empty_like(fwd)
    du_f = np.empty_like(fwd)
    u_f[0], du_f[0] = s, 0.0
    inside = fwd < SERIES_RADIUS
    u_f[inside] = _series_start(N, p, s, 0.0)[0]
    rest = ~inside
    ys = sols[1].sol(fwd[rest])
    u_f[rest], du_f[rest] = ys[0], ys[1]
    u_m = float(u_f[-1])
    du_m = float(du_f[-1])

    # inward continuation along the decaying far-field branch
    bwd = grid[grid >= r_match][::-1]
    t_end = tail_shape(N, r_max)
    t_m = tail_shape(N, r_match)

    def inward(c):
        sol = solve_ivp(
            _rhs(N, p),
            (r_max, r_match),
            [c * t_end[0], c * t_end[1]],
            method="DOP853",
            rtol=rtol,
            atol=1e-40,
            t_eval=bwd,
        )
        if sol.status != 0:
            raise IntegrationError(f"inward tail integration failed: {sol.message}")
        return sol

    c_prev = u_m / t_m[0]
    sol = inward(c_prev)
    f_prev = sol.y[0][-1] - u_m
    # the tail is nearly linear in its amplitude: rescale once, then secant steps
    c = c_prev * u_m / sol.y[0][-1]
    for _ in range(30):
        sol = inward(c)
        f_cur = sol.y[0][-1] - u_m
        if abs(f_cur) <= INWARD_MATCH_TOL * abs(u_m) or f_cur == f_prev:
            break
        c, c_prev, f_prev = c - f_cur * (c - c_prev) / (f_cur - f_prev), c, f_cur
    u_b = sol.y[0][::-1]
    du_b = sol.y[1][::-1]

    U = np.concatenate([u_f, u_b[1:]])
    U1 = np.concatenate([du_f, du_b[1:]])
    U2 = _ode_second_derivative(N, p, grid, U, U1, s)
    if np.any(U <= 0) or np.any(U1[1:] >= 0):
        raise NoGroundStateError("assembled profile is not positive and decreasing")

    meta = {
        "bisection_iterations": iterations,
        "bracket": [lo, hi],
        "r_trust": float(r_trust),
        "trust_tolerance": trust_tol,
        "slope_mismatch": float(abs(du_b[0] - du_m) / abs(du_m)),
        "tail_amplitude": float(c),
    }
    profile = RadialProfile(
        N=N, p=p, grid=grid, U=U, U1=U1, U2=U2, C0=float(c), r_match=r_match, shoot_value=s, meta=meta
    )
    object.__setattr__(profile, "C0", decay_constant(profile))
    return profile


def decay_constant(profile: RadialProfile) -> float:
    """Median of the tail plateau; raises if it varies by more than 1 %."""
    _, q = profile.plateau()
    c0 = float(np.median(q))
    if not (np.isfinite(c0) and c0 > 0):
        raise TailNotConvergedError(f"non-positive decay constant {c0}")
    variation = float((q.max() - q.min()) / c0)
    if variation > PLATEAU_TOLERANCE:
        raise TailNotConvergedError(
            f"tail plateau varies by {variation:.2%} over [{profile.r_match:g}, {profile.r_max:g}];"
            " increase r_max"
        )
    return c0


def plateau_variation(profile: RadialProfile) -> float:
    """Relative spread of U e^r r^((N-1)/2) over [r_match, r_max]."""
    sel = profile.grid >= profile.r_match
    r = profile.grid[sel]
    q = profile.U[sel] * np.exp(r) * r ** (0.5 * (profile.N - 1))
    return float((q.max() - q.min()) / np.median(q))
