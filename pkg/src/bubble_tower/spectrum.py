"""Spectra of the linearisation -Lap + 1 - p U^(p-1), sector by sector, plus a 1D multi-soliton toy.

In the l-th spherical-harmonic sector, with v = r^((N-1)/2) phi, the operator becomes
-v'' + [(l + (N-3)/2)(l + (N-1)/2) / r^2 + 1 - p U^(p-1)] v on (0, r_max), v = 0 at both ends.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigError, ResolutionError
from .profile import RadialProfile, soliton_1d

N_EIGS = 4
ZERO_TOL = 1e-4
RESOLUTION_TOL = 1e-4


@dataclass
class SpectralReport:
    ell: int
    lowest_eigenvalues: list
    zero_mode_alignment: float | None
    negative_count: int
    grid: tuple
    eigenvector_samples: list = field(default_factory=list)
    symmetry: str = ""
    extrapolated: bool = False
    levels: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "ell": self.ell,
            "lowest_eigenvalues": list(self.lowest_eigenvalues),
            "zero_mode_alignment": self.zero_mode_alignment,
            "negative_count": self.negative_count,
            "grid": list(self.grid),
            "symmetry": self.symmetry,
            "extrapolated": self.extrapolated,
        }


def sturm_count(diag, off, lam) -> np.ndarray:
    """Number of eigenvalues below each ``lam`` of the symmetric tridiagonal matrix (diag, off)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    off2 = np.asarray(off, dtype=float) ** 2
    tiny = np.finfo(float).tiny
    q = diag[0] - lam
    count = (q < 0).astype(int)
    for i in range(1, len(diag)):
        q = np.where(q == 0.0, tiny, q)
        q = diag[i] - lam - off2[i - 1] / q
        count += q < 0
    return count


def sturm_bisection(diag, off, n_eigs: int, tol: float = 1e-13, max_iter: int = 200) -> np.ndarray:
    """Lowest ``n_eigs`` eigenvalues by bisection on the Sturm count (all brackets refined together)."""
    radius = np.abs(np.concatenate([[0.0], off])) + np.abs(np.concatenate([off, [0.0]]))
    lo0, hi0 = float(np.min(diag - radius)), float(np.max(diag + radius))
    lo = np.full(n_eigs, lo0)
    hi = np.full(n_eigs, hi0)
    target = np.arange(1, n_eigs + 1)
    for _ in range(max_iter):
        if np.all(hi - lo <= tol * np.maximum(1.0, np.abs(hi))):
            break
        mid = 0.5 * (lo + hi)
        enough = sturm_count(diag, off, mid) >= target
        hi = np.where(enough, mid, hi)
        lo = np.where(enough, lo, mid)
    return 0.5 * (lo + hi)


def _sector_matrix(profile: RadialProfile, ell: int, r_max: float, spacing: float, potential_scale: float):
    n = int(round(r_max / spacing)) - 1
    r = spacing * np.arange(1, n + 1)
    N, p = profile.N, profile.p
    cent = (ell + 0.5 * (N - 3)) * (ell + 0.5 * (N - 1))
    u = profile.value(r)
    diag = 2.0 / spacing**2 + cent / r**2 + 1.0 - potential_scale * p * u ** (p - 1.0)
    off = np.full(n - 1, -1.0 / spacing**2)
    return r, diag, off


def _lowest(diag, off, n_eigs, vectors=False):
    if vectors:
        return eigh_tridiagonal(diag, off, select="i", select_range=(0, n_eigs - 1), lapack_driver="stebz")
    return eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, n_eigs - 1), lapack_driver="stebz")


def _richardson(levels):
    """Two sweeps of h^2 extrapolation over spacings h, h/2, h/4."""
    a, b, c = (np.asarray(v) for v in levels)
    ab = (4.0 * b - a) / 3.0
    bc = (4.0 * c - b) / 3.0
    return (16.0 * bc - ab) / 15.0


def _check_resolution(levels, what):
    """The h^2-extrapolants from (h, h/2) and (h/2, h/4) must agree."""
    a, b, c = (np.asarray(v) for v in levels)
    change = float(np.max(np.abs((4.0 * c - b) / 3.0 - (4.0 * b - a) / 3.0)))
    if change > RESOLUTION_TOL:
        raise ResolutionError(f"{what}: eigenvalues move by {change:.2e} under refinement; refine the grid")


def discrete_operator_residual(profile, ell, r_max=30.0, spacing=0.01) -> float:
    """||L_1 w|| / ||w|| for w the sampled translation mode r^((N-1)/2) U'."""
    r, diag, off = _sector_matrix(profile, ell, r_max, spacing, 1.0)
    w = r ** (0.5 * (profile.N - 1)) * profile.eval(r)[1]
    Lw = diag * w
    Lw[:-1] += off * w[1:]
    Lw[1:] += off * w[:-1]
    return float(np.linalg.norm(Lw) / np.linalg.norm(w))


def radial_linearized_spectrum(
    profile: RadialProfile,
    ell: int,
    r_max: float = 30.0,
    spacing: float = 0.02,
    n_eigs: int = N_EIGS,
    potential_scale: float = 1.0,
    extrapolate: bool = True,
) -> SpectralReport:
    """Lowest eigenvalues of the l-th sector; extrapolated over spacings h, h/2, h/4 when asked."""
    if ell < 0:
        raise ConfigError("ell must be >= 0")
    if profile.N < 2:
        raise ConfigError("sector decomposition needs N >= 2; use toy_tower_spectrum_1d on the line")
    if spacing > 0.02 or r_max < 25:
        raise ConfigError("grid must have spacing <= 0.02 and r_max >= 25")
    spacings = [spacing, spacing / 2.0, spacing / 4.0] if extrapolate else [spacing]
    levels = []
    for h in spacings:
        _, diag, off = _sector_matrix(profile, ell, r_max, h, potential_scale)
        levels.append(_lowest(diag, off, n_eigs))
    if extrapolate:
        _check_resolution(levels, f"sector {ell}")
        eigs = _richardson(levels)
    else:
        eigs = levels[0]
    # eigenvector of the lowest mode on the finest grid
    r, diag, off = _sector_matrix(profile, ell, r_max, spacings[-1], potential_scale)
    _, vecs = _lowest(diag, off, 1, vectors=True)
    vec = vecs[:, 0]
    alignment = None
    if ell == 1:
        w = r ** (0.5 * (profile.N - 1)) * profile.eval(r)[1]
        alignment = float(abs(vec @ w) / (np.linalg.norm(vec) * np.linalg.norm(w)))
    stride = max(1, len(r) // 50)
    eigs = np.sort(np.asarray(eigs, dtype=float))
    return SpectralReport(
        ell=ell,
        lowest_eigenvalues=eigs.tolist(),
        zero_mode_alignment=alignment,
        negative_count=int(np.sum(eigs < -ZERO_TOL)),
        grid=(r_max, spacing),
        eigenvector_samples=np.column_stack([r[::stride], vec[::stride]]).tolist(),
        extrapolated=extrapolate,
        levels=[np.asarray(v).tolist() for v in levels],
    )


def nondegeneracy_check(profile: RadialProfile, ells=(0, 1, 2, 3, 4), potential_scale: float = 1.0, **grid) -> dict:
    """PASS iff l = 1 carries an aligned zero mode, l = 0 has no zero mode and l >= 2 is positive."""
    reports = {ell: radial_linearized_spectrum(profile, ell, potential_scale=potential_scale, **grid) for ell in ells}
    checks = {}
    failures = []
    if 1 in reports:
        rep = reports[1]
        lam = rep.lowest_eigenvalues[0]
        checks["l1_zero_mode"] = abs(lam) <= 1e-6 and rep.zero_mode_alignment >= 0.999
        if not checks["l1_zero_mode"]:
            failures.append(f"translation mode broken: l=1 lowest eigenvalue {lam:.3e}, alignment {rep.zero_mode_alignment:.4f}")
    if 0 in reports:
        eigs = np.asarray(reports[0].lowest_eigenvalues)
        checks["l0_no_zero_mode"] = bool(np.all(np.abs(eigs) > ZERO_TOL))
        checks["l0_one_negative"] = reports[0].negative_count == 1
        if not checks["l0_no_zero_mode"]:
            failures.append("radial sector has a zero eigenvalue")
    for ell, rep in reports.items():
        if ell >= 2:
            checks[f"l{ell}_positive"] = rep.lowest_eigenvalues[0] > ZERO_TOL
            if not checks[f"l{ell}_positive"]:
                failures.append(f"sector {ell} is not positive")
    verdict = "PASS" if all(checks.values()) else "FAIL"
    return {"verdict": verdict, "checks": checks, "failures": failures, "reports": reports}


# -- 1D toy tower -------------------------------------------------------------------


def _half_line_matrix(x, w, p, h, parity):
    n = len(x)
    diag = 2.0 / h**2 + 1.0 - p * w ** (p - 1.0)
    diag[0] += (-1.0 if parity == "even" else 1.0) / h**2  # reflection across the centre
    diag[-1] += 1.0 / h**2  # Dirichlet half a cell beyond the last node
    return diag, np.full(n - 1, -1.0 / h**2)


def _toy_levels(p, centers, half_length, h, n_eigs):
    xc = 0.5 * (centers[0] + centers[-1])
    symmetric = np.allclose(np.sort(2 * xc - centers), centers, rtol=0, atol=1e-12)
    out = {}
    if symmetric:
        n = int(round(half_length / h))
        s = (np.arange(n) + 0.5) * h
        w = sum(soliton_1d(p, s - (c - xc)) for c in centers)
        for parity in ("even", "odd"):
            diag, off = _half_line_matrix(s, w, p, h, parity)
            out[parity] = _lowest(diag, off, n_eigs)
    else:
        n = int(round(2 * half_length / h))
        s = -half_length + (np.arange(n) + 0.5) * h
        w = sum(soliton_1d(p, s - (c - xc)) for c in centers)
        diag = 2.0 / h**2 + 1.0 - p * w ** (p - 1.0)
        diag[0] += 1.0 / h**2
        diag[-1] += 1.0 / h**2
        out["full"] = _lowest(diag, np.full(n - 1, -1.0 / h**2), n_eigs)
    return out


def toy_tower_spectrum_1d(p: float, centers, margin: float = 20.0, spacing: float = 0.01, n_eigs: int = N_EIGS) -> list:
    """Lowest eigenvalues of -d_xx + 1 - p W^(p-1), W a sum of solitons, per parity class about the centre.

    Cell-centred grids (spacing, spacing/2, spacing/4) with h^2 extrapolation; asymmetric
    configurations come back as a single "full" class.
    """
    centers = np.sort(np.asarray(centers, dtype=float))
    if len(centers) > 1 and np.min(np.diff(centers)) < 2.0:
        raise ConfigError("centers must be separated by at least 2")
    half_length = 0.5 * (centers[-1] - centers[0]) + margin
    runs = [_toy_levels(p, centers, half_length, h, n_eigs) for h in (spacing, spacing / 2.0, spacing / 4.0)]
    reports = []
    for cls in runs[0]:
        levels = [run[cls] for run in runs]
        _check_resolution(levels, f"toy spectrum ({cls})")
        eigs = np.sort(_richardson(levels))
        reports.append(
            SpectralReport(
                ell=-1,
                lowest_eigenvalues=eigs.tolist(),
                zero_mode_alignment=None,
                negative_count=int(np.sum(eigs < -ZERO_TOL)),
                grid=(half_length, spacing),
                symmetry=cls,
                extrapolated=True,
                levels=[np.asarray(v).tolist() for v in levels],
            )
        )
    return reports


def near_kernel_decay(p: float = 3.0, separations=(4.0, 6.0, 8.0, 10.0), **grid) -> dict:
    """Two smallest |eigenvalues| for solitons at +-d/2 and the log-linear fit in d."""
    from scipy.stats import linregress

    rows = []
    for d in separations:
        reports = toy_tower_spectrum_1d(p, [-0.5 * d, 0.5 * d], **grid)
        eigs = np.concatenate([rep.lowest_eigenvalues for rep in reports])
        small = np.sort(np.abs(eigs))[:2]
        rows.append(small)
    rows = np.array(rows)
    fits = [linregress(separations, np.log(rows[:, i])) for i in range(2)]
    return {
        "separations": list(separations),
        "small_eigenvalues": rows.tolist(),
        "slopes": [f.slope for f in fits],
        "r_squared": [f.rvalue**2 for f in fits],
    }
