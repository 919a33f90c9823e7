"""Command-line entry point: ``bubble-tower <command> [options]``.

Config files are flat ``key = value`` lines. Keys before the first section
header apply everywhere; a ``[command]`` section adds or overrides keys for
that command only. Flags given on the command line win over the file.
Artifacts land in ``--out``, else ``$BUBBLE_TOWER_OUT``, else the config's
``out`` key, else ``./bubble_tower_out``.
"""
from __future__ import annotations

import argparse
import configparser
import os
import sys
from pathlib import Path

import numpy as np

from . import artifacts
from .errors import BubbleTowerError, ConfigError
from .model import MODEL_KEYS, ModelParams

COMMANDS = (
    "profile",
    "coeffs",
    "landscape",
    "critical-point",
    "balance",
    "scaling",
    "lk-decay",
    "pohozaev",
    "spectrum",
    "toy-tower",
    "report",
)
DEFAULT_OUT = "bubble_tower_out"

# command-specific options: name -> (parser, default)
OPTIONS = {
    "profile": {"r_max": (float, 30.0), "dr": (float, 0.01)},
    "coeffs": {"panels": (int, 64)},
    "landscape": {"k": (int, 1000), "nr": (int, 41), "nh": (int, 41)},
    "critical-point": {"k": ("ints", [1000, 10000, 100000, 1000000])},
    "balance": {"k": ("ints", [1000, 10000, 100000, 1000000])},
    "scaling": {"k": ("ints", [1000, 10000, 100000, 1000000])},
    "lk-decay": {"k": ("ints", [8, 16, 32, 64])},
    "pohozaev": {"spacings": ("floats", [0.1, 0.05, 0.025]), "j": ("ints", [1, 2, 3])},
    "spectrum": {
        "ells": ("ints", [0, 1, 2, 3, 4]),
        "spacing": (float, 0.02),
        "r_max": (float, 30.0),
        "potential_scale": (float, 1.0),
    },
    "toy-tower": {"separations": ("floats", [4.0, 6.0, 8.0, 10.0])},
    "report": {"samples": (int, 100)},
}


def _convert(kind, raw):
    if kind == "ints":
        return [int(float(v)) for v in str(raw).replace(",", " ").split()]
    if kind == "floats":
        return [float(v) for v in str(raw).replace(",", " ").split()]
    return kind(float(raw)) if kind is int else kind(raw)


def read_config(path, command: str) -> dict:
    """Global keys merged with the ``[command]`` section."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep "N" distinct from "n"
    try:
        parser.read_string("[DEFAULT]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    merged = dict(parser.defaults())
    if parser.has_section(command):
        merged.update(parser[command])
    return merged


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bubble-tower", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", help="flat key=value config file")
        cmd.add_argument("--out", help="output directory")
        cmd.add_argument("--seed", type=int, help="seed for randomized sampling (default 0)")
        for key in MODEL_KEYS:
            cmd.add_argument(f"--{key}", dest=key, type=int if key == "N" else float)
        for key in OPTIONS[name]:
            cmd.add_argument(f"--{key.replace('_', '-')}", dest=key)
    return parser


class RunConfig:
    """Resolved model parameters, command options, seed and output directory."""

    def __init__(self, command: str, params: ModelParams, options: dict, seed: int, out: Path):
        self.command = command
        self.params = params
        self.options = options
        self.seed = seed
        self.out = out

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        file_values = read_config(args.config, args.command) if args.config else {}
        model = {key: file_values.get(key) for key in MODEL_KEYS}
        for key in MODEL_KEYS:
            if getattr(args, key) is not None:
                model[key] = getattr(args, key)
        params = ModelParams.from_mapping(model)
        options = {}
        for key, (kind, default) in OPTIONS[args.command].items():
            raw = getattr(args, key)
            if raw is None:
                raw = file_values.get(key)
            try:
                options[key] = default if raw is None else _convert(kind, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        seed = args.seed if args.seed is not None else int(file_values.get("seed", 0))
        out = args.out or os.environ.get("BUBBLE_TOWER_OUT") or file_values.get("out") or DEFAULT_OUT
        return cls(args.command, params, options, seed, Path(out))


def _fmt(x) -> str:
    return artifacts.FLOAT_FORMAT % x


# -- commands -------------------------------------------------------------------


def _profile(run: RunConfig):
    from .profile import solve_ground_state

    opts = run.options
    return solve_ground_state(run.params.N, run.params.p, r_max=opts.get("r_max", 30.0), dr=opts.get("dr", 0.01))


def cmd_profile(run: RunConfig):
    from .profile import decay_constant, plateau_variation

    prof = _profile(run)
    prof.save(run.out / "profile.csv")
    summary = {
        "N": prof.N,
        "p": prof.p,
        "U0": prof.shoot_value,
        "C0": prof.C0,
        "r_match": prof.r_match,
        "decay_constant": decay_constant(prof),
        "plateau_variation": plateau_variation(prof),
    }
    artifacts.write_json(summary, run.out / "profile_summary.json")
    print(f"U(0) = {_fmt(prof.shoot_value)}  C0 = {_fmt(prof.C0)}  r_match = {prof.r_match:g}")


def _coeffs(run, prof=None):
    from .coefficients import compute_coefficients

    prof = prof or _profile(run)
    return prof, compute_coefficients(prof, run.params.a1, panels=run.options.get("panels", 64))


def cmd_coeffs(run: RunConfig):
    _, c = _coeffs(run)
    c.save(run.out / "coefficients.json")
    print(f"A1 = {_fmt(c.A1)}  A2 = {_fmt(c.A2)}  B1 = {_fmt(c.B1)}  err = {c.quadrature_error_estimate:.3g}")


def cmd_landscape(run: RunConfig):
    from .energy import reduced_energy
    from .geometry import admissible_rectangle

    run.params.require_tower()
    _, c = _coeffs(run)
    k = run.options["k"]
    (r_lo, r_hi), (h_lo, h_hi) = admissible_rectangle(k, run.params.m)
    rows = []
    for r in np.linspace(r_lo, r_hi, run.options["nr"]):
        for h in np.linspace(h_lo, h_hi, run.options["nh"]):
            rep = reduced_energy(c, run.params, k, r, h)
            rows.append((k, r, h, rep.value, rep.dF_dr, rep.dF_dh, rep.residual_norm))
    path = artifacts.write_csv(run.out / f"landscape_k{k}.csv", ["k", "r", "h", "F", "dF_dr", "dF_dh", "rel_residual"], rows)
    print(f"{len(rows)} landscape samples -> {path}")


def _critical_points(run, c, ks):
    from .energy import find_critical_point

    run.params.require_tower()
    return [find_critical_point(c, run.params, k) for k in ks]


def _critical_rows(cps):
    return [
        (cp.k, cp.r_star, cp.h_star, cp.r_star / (cp.k * np.log(cp.k)), cp.h_star * cp.k, cp.grad_residual, cp.in_interior, cp.boundary_ok)
        for cp in cps
    ]


CRITICAL_HEADER = ["k", "r_star", "h_star", "r_over_klnk", "h_times_k", "grad_residual", "in_interior", "boundary_ok"]


def cmd_critical_point(run: RunConfig):
    _, c = _coeffs(run)
    cps = _critical_points(run, c, run.options["k"])
    rows = _critical_rows(cps)
    artifacts.write_csv(run.out / "critical_points.csv", CRITICAL_HEADER, rows)
    print("k  r*/(k ln k)  h* k  residual  interior")
    for row in rows:
        print(f"{row[0]}  {row[3]:.6f}  {row[4]:.6f}  {row[5]:.2e}  {row[6]}")


def cmd_balance(run: RunConfig):
    from .energy import balance_residuals, config_at

    prof, c = _coeffs(run)
    cps = _critical_points(run, c, run.options["k"])
    rows = []
    for cp in cps:
        b = balance_residuals(prof, c, run.params, config_at(cp, run.params.N))
        rows.append((cp.k,) + tuple(b[key] for key in sorted(b)))
    keys = sorted(balance_residuals(prof, c, run.params, config_at(cps[0], run.params.N)))
    artifacts.write_csv(run.out / "balance.csv", ["k"] + keys, rows)
    print("k  " + "  ".join(keys))
    for row in rows:
        print("  ".join([str(row[0])] + [f"{v:.6f}" for v in row[1:]]))


def cmd_scaling(run: RunConfig):
    from .energy import config_at, scaling_relations

    prof, c = _coeffs(run)
    rows = []
    for cp in _critical_points(run, c, run.options["k"]):
        s = scaling_relations(prof, run.params, config_at(cp, run.params.N))
        rows.append((cp.k, s["ratio_neighbor"], s["ratio_layer"], s["dominance"], s["in_band"]))
    artifacts.write_csv(run.out / "scaling.csv", ["k", "ratio_neighbor", "ratio_layer", "dominance", "in_band"], rows)
    print("k  ratio_neighbor  ratio_layer  dominance")
    for row in rows:
        print(f"{row[0]}  {row[1]:.6f}  {row[2]:.6f}  {row[3]:.6f}")


def cmd_lk_decay(run: RunConfig):
    from .report import check_lk_decay

    prof, c = _coeffs(run)
    run.params.require_tower()
    sweep = check_lk_decay(prof, run.params, c, run.options["k"], run.seed)
    artifacts.write_json(sweep, run.out / "lk_decay.json")
    artifacts.write_csv(run.out / "lk_decay.csv", ["k", "star_norm"], zip(sweep["k"], sweep["star_norm"]))
    print(f"slope {sweep['slope']:.4f} (threshold {sweep['threshold']:.4f})")


def cmd_pohozaev(run: RunConfig):
    from .pohozaev import convergence_table
    from .report import gaussian_pair

    out = {}
    print("j  spacing  residual  ratio")
    for j in run.options["j"]:
        rows = convergence_table(gaussian_pair, run.params, run.params.p, j, run.options["spacings"])
        out[f"j={j}"] = rows
        for row in rows:
            ratio = f"{row['ratio']:.4f}" if "ratio" in row else "-"
            print(f"{j}  {row['spacing']:g}  {row['residual']:.6e}  {ratio}")
    artifacts.write_json(out, run.out / "pohozaev.json")


def cmd_spectrum(run: RunConfig):
    from .spectrum import nondegeneracy_check

    prof = _profile(run)
    opts = run.options
    res = nondegeneracy_check(
        prof, tuple(opts["ells"]), potential_scale=opts["potential_scale"], r_max=opts["r_max"], spacing=opts["spacing"]
    )
    reports = res["reports"]
    data = {
        "verdict": res["verdict"],
        "checks": res["checks"],
        "failures": res["failures"],
        "sectors": {str(ell): rep.to_json() for ell, rep in reports.items()},
    }
    artifacts.write_json(data, run.out / "spectrum.json")
    print("ell  lowest eigenvalues  negative  alignment")
    for ell, rep in reports.items():
        eigs = " ".join(f"{v:.8g}" for v in rep.lowest_eigenvalues)
        align = "-" if rep.zero_mode_alignment is None else f"{rep.zero_mode_alignment:.8f}"
        print(f"{ell}  {eigs}  {rep.negative_count}  {align}")
    print(res["verdict"] + "".join(f"\n  {msg}" for msg in res["failures"]))


def cmd_toy_tower(run: RunConfig):
    from .spectrum import near_kernel_decay

    res = near_kernel_decay(run.params.p, tuple(run.options["separations"]))
    artifacts.write_json(res, run.out / "toy_tower.json")
    rows = [(d, *small) for d, small in zip(res["separations"], res["small_eigenvalues"])]
    artifacts.write_csv(run.out / "toy_tower.csv", ["separation", "lambda_1", "lambda_2"], rows)
    print(f"slopes {res['slopes'][0]:.4f} {res['slopes'][1]:.4f}  R^2 {res['r_squared'][0]:.5f} {res['r_squared'][1]:.5f}")


def cmd_report(run: RunConfig):
    from .report import ReportOptions, run_report

    summary = run_report(run.params, ReportOptions(gradient_samples=run.options["samples"], seed=run.seed))
    out = run.out
    trend = summary["05_critical_trend"]
    sweeps = {
        "critical_points.csv": (
            ["k", "r_star", "h_star", "r_over_klnk", "h_times_k", "grad_residual"],
            [
                (row["k"], row["r"], row["h"], rk, hk, row["grad_residual"])
                for row, rk, hk in zip(summary["critical_points"], trend["r_over_klnk"], trend["h_times_k"])
            ],
        ),
        "scaling.csv": (
            ["k", "ratio_neighbor", "ratio_layer", "dominance"],
            list(zip(trend["k"], *(summary["06_scaling"][key] for key in ("ratio_neighbor", "ratio_layer", "dominance")))),
        ),
        "interaction.csv": (["k", "ratio"], list(zip(summary["10_interaction"]["k"], summary["10_interaction"]["ratio"]))),
        "lk_decay.csv": (["k", "star_norm"], list(zip(summary["07_lk_decay"]["k"], summary["07_lk_decay"]["star_norm"]))),
        "toy_tower.csv": (
            ["separation", "lambda_1", "lambda_2"],
            [(d, *small) for d, small in zip(summary["12_toy_tower"]["separations"], summary["12_toy_tower"]["small_eigenvalues"])],
        ),
    }
    balance = summary["11_balance"]
    keys = sorted(key for key in balance if key.startswith("ratio_") and not key.endswith("_variation"))
    sweeps["balance.csv"] = (["k"] + keys, list(zip(balance["k"], *(balance[key] for key in keys))))
    digests = {}
    for name, (header, rows) in sorted(sweeps.items()):
        digests[name] = artifacts.sha256(artifacts.write_csv(out / name, header, rows))
    summary["13_reproducibility"] = {"artifact_sha256": digests, "seed": run.seed}
    path = artifacts.write_json(summary, out / "summary.json")
    for key in sorted(summary):
        block = summary[key]
        if isinstance(block, dict) and "passed" in block:
            print(f"{key}: {'PASS' if block['passed'] else 'FAIL'}")
    print(f"summary -> {path}")


HANDLERS = {
    "profile": cmd_profile,
    "coeffs": cmd_coeffs,
    "landscape": cmd_landscape,
    "critical-point": cmd_critical_point,
    "balance": cmd_balance,
    "scaling": cmd_scaling,
    "lk-decay": cmd_lk_decay,
    "pohozaev": cmd_pohozaev,
    "spectrum": cmd_spectrum,
    "toy-tower": cmd_toy_tower,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = RunConfig.from_args(args)
        run.out.mkdir(parents=True, exist_ok=True)
        HANDLERS[run.command](run)
    except BubbleTowerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
