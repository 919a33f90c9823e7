"""Model parameters and the radial potential V(r) = 1 + a1/(1+r^m) + a2/(1+r^(m+1))."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidPotentialError

MODEL_KEYS = ("N", "p", "a1", "a2", "m", "tau")


@dataclass(frozen=True)
class ModelParams:
    """Dimension, exponent and potential coefficients.

    Only the basic invariants (p > 1, subcriticality, a1 > 0, tau in (0, 1))
    are enforced at construction; the stronger tail assumption on ``m`` is
    checked by :meth:`require_tower` before any tower/nested computation.
    """

    N: int = 3
    p: float = 3.0
    a1: float = 1.0
    a2: float = 0.0
    m: float = 5.0
    tau: float = 0.1

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if not self.p > 1:
            raise ConfigError(f"exponent p must exceed 1, got {self.p}")
        if self.N >= 3 and not self.p < (self.N + 2) / (self.N - 2):
            raise ConfigError(
                f"p={self.p} is not subcritical: need p < (N+2)/(N-2) = {(self.N + 2) / (self.N - 2):g}"
            )
        if not self.a1 > 0:
            raise ConfigError(f"a1 must be positive, got {self.a1}")
        if not 0 < self.tau < 1:
            raise ConfigError(f"tau must lie in (0, 1), got {self.tau}")
        if not self.m > 0:
            raise ConfigError(f"m must be positive, got {self.m}")
        check_potential(self)

    @property
    def m_threshold(self) -> float:
        return max(4.0 / (self.p - 1.0), 4.0)

    def require_tower(self, min_dim: int = 3) -> None:
        """Raise ConfigError unless the tail assumption and dimension bound hold."""
        if self.N < min_dim:
            raise ConfigError(f"this routine needs N >= {min_dim}, got N={self.N}")
        if not self.m > self.m_threshold:
            raise ConfigError(
                f"assumption violated: m={self.m:g} must exceed max(4/(p-1), 4) = {self.m_threshold:g}"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, mapping) -> "ModelParams":
        kwargs = {}
        for key in MODEL_KEYS:
            if key in mapping and mapping[key] is not None:
                kwargs[key] = int(mapping[key]) if key == "N" else float(mapping[key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ModelParams":
        return cls.from_mapping(read_flat_config(path))


def read_flat_config(path) -> dict:
    """Parse ``key = value`` lines, ignoring blanks, comments and section headers."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ConfigError(f"malformed config line: {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def potential_excess(params: ModelParams, r):
    """V(r) - 1 without the cancellation of forming V first."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("the potential needs r >= 0")
    m = params.m
    return params.a1 / (1.0 + r**m) + params.a2 / (1.0 + r ** (m + 1))


def potential_value(params: ModelParams, r):
    return 1.0 + potential_excess(params, r)


def potential_grad_radial(params: ModelParams, r):
    """Exact V'(r); vanishes at the origin because m > 1."""
    r = np.asarray(r, dtype=float)
    m = params.m
    t1 = -params.a1 * m * r ** (m - 1) / (1.0 + r**m) ** 2
    t2 = -params.a2 * (m + 1) * r**m / (1.0 + r ** (m + 1)) ** 2
    return t1 + t2


def potential_gradient(params: ModelParams, y):
    """Cartesian gradient of V(|y|) for points ``y`` of shape (..., d)."""
    y = np.asarray(y, dtype=float)
    rho = np.linalg.norm(y, axis=-1)
    dv = potential_grad_radial(params, rho)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(rho > 0, dv / np.where(rho > 0, rho, 1.0), 0.0)
    return y * scale[..., None]


def check_potential(params: ModelParams) -> None:
    if params.a2 >= 0:
        return
    r = np.concatenate([np.linspace(0.0, 10.0, 4001), np.geomspace(10.0, 1e6, 2001)])
    vmin = float(np.min(potential_value(params, r)))
    if vmin <= 0:
        raise InvalidPotentialError(
            f"a2={params.a2} drives V below zero (min V ~ {vmin:.3g}); V must stay positive"
        )
