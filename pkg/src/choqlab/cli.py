"""Command-line front end: constants, threshold, solve, fiber, verify.

One command per process.  Every artifact has a single canonical format
(JSON for reports, CSV for curves, CHQF1 for fields) and is written
atomically.  Timestamps and host info live in a separate "meta" block so
scientific content diffs stay clean; everything outside "meta" is
deterministic for a fixed config.

Exit codes: 0 success, 1 usage or config error, 2 non-convergence or a
failed certified-regime check, 3 I/O error.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import platform
import sys
import tempfile
import time

import numpy as np
import scipy

from .energy import energy, l2_gradient, lambda_of
from .energy import nehari_pohozaev_residual, pohozaev_residual
from .fiber import FiberCurve, default_taus, fiber_curve, unimodality_report
from .grid import Field, Grid, grad_norm_sq, inner, mass, read_field, write_field
from .problem import ProblemParams, make_nonlinearity, parse_nonlinearity
from .riesz import build_kernel
from .thresholds import build_bundle, h_value
from .minimize import SolveOptions, solve


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------
# Config plumbing
# ----------------------------------------------------------------------

def default_config() -> dict:
    """Full config tree; None marks the fields that must be supplied."""
    return {
        "problem": {"N": None, "alpha": None, "b": None, "rho": None},
        "nonlinearity": None,   # "nu1*|t|^p1 + ..." or [[coef, exponent], ...]
        "grid": {"m": 64, "L": 24.0},
        "solver": {
            "max_iters": 8000,
            "step0": 0.5,
            "tol_grad": 1e-6,
            "n_starts": 5,
            "seed": 0,
            "r_cap": None,
            "allow_outside_theory": False,
        },
        "fiber": {"enabled": False, "tau_min": 0.01, "tau_max": 10.0,
                  "n_tau": 200},
        "threshold": {"n_samples": 400},
        "output_dir": "choqlab_out",
    }


def _merge_section(base: dict, incoming: dict, path: str) -> None:
    for key, value in incoming.items():
        if key not in base:
            raise UsageError(f"unknown config key {path}{key}")
        if isinstance(base[key], dict) and base[key] is not None:
            if not isinstance(value, dict):
                raise UsageError(f"config key {path}{key} must be a table")
            _merge_section(base[key], value, f"{path}{key}.")
        else:
            base[key] = value


def load_config(args: argparse.Namespace) -> dict:
    cfg = default_config()
    if args.config is not None:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise UsageError("config root must be a JSON object")
        _merge_section(cfg, file_cfg, "")

    overrides = {
        "N": ("problem", "N"), "alpha": ("problem", "alpha"),
        "b": ("problem", "b"), "rho": ("problem", "rho"),
        "m": ("grid", "m"), "L": ("grid", "L"),
        "seed": ("solver", "seed"), "starts": ("solver", "n_starts"),
    }
    for attr, (section, key) in overrides.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[section][key] = value
    if getattr(args, "G", None) is not None:
        cfg["nonlinearity"] = args.G
    if getattr(args, "out", None) is not None:
        cfg["output_dir"] = args.out
    if getattr(args, "fiber", False):
        cfg["fiber"]["enabled"] = True

    missing = [k for k, v in cfg["problem"].items() if v is None]
    if cfg["nonlinearity"] is None:
        missing.append("G")
    if missing:
        raise UsageError(
            "missing required parameters: " + ", ".join(missing)
            + " (set via flags or --config)"
        )
    return cfg


def build_problem(cfg: dict):
    prob = cfg["problem"]
    params = ProblemParams(N=int(prob["N"]), alpha=float(prob["alpha"]),
                           b=int(prob["b"]), rho=float(prob["rho"]))
    spec = cfg["nonlinearity"]
    if isinstance(spec, str):
        nl = parse_nonlinearity(params, spec)
    else:
        pairs = []
        for item in spec:
            if isinstance(item, dict):
                pairs.append((float(item["coef"]), float(item["exponent"])))
            else:
                coef, exponent = item
                pairs.append((float(coef), float(exponent)))
        nl = make_nonlinearity(params, pairs)
    # normalized echo so identical configs serialize identically
    cfg["nonlinearity"] = [[t.coef, t.exponent] for t in nl.terms]
    return params, nl


def build_grid(cfg: dict, params: ProblemParams) -> Grid:
    return Grid(dim=params.N, m=int(cfg["grid"]["m"]),
                L=float(cfg["grid"]["L"]))


# ----------------------------------------------------------------------
# Serialization helpers
# ----------------------------------------------------------------------

def _clean(obj):
    """Make a structure JSON-safe: numpy scalars to floats, inf/nan to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_text_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, payload: dict) -> None:
    text = json.dumps(_clean(payload), indent=2, sort_keys=True,
                      allow_nan=False) + "\n"
    write_text_atomic(path, text)


def _meta() -> dict:
    return {
        "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "host": platform.node(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def echo_config(cfg: dict, out_dir: str) -> None:
    write_json(os.path.join(out_dir, "config.json"), cfg)


def bundle_payload(bundle) -> dict:
    return {
        "N": bundle.N, "alpha": bundle.alpha, "b": bundle.b,
        "rho": bundle.rho,
        "a_alpha": bundle.a_alpha, "c_alpha": bundle.c_alpha,
        "s1": bundle.s1, "s2": bundle.s2, "s3": bundle.s3,
        "c0": bundle.c0, "c1": bundle.c1, "c2": bundle.c2,
        "rho0": bundle.rho0, "t0": bundle.t0, "hmax": bundle.hmax,
        "R0": bundle.r0, "R1": bundle.r1,
        "provenance": dict(bundle.provenance),
    }


def residual_block(params, nl, kernel, u: Field) -> dict:
    """Recomputable certificate block shared by solve reports and verify."""
    eb = energy(params, nl, kernel, u)
    lam = lambda_of(params, nl, kernel, u)
    grad = l2_gradient(params, nl, kernel, u)
    shifted = Field(u.grid, grad.values + lam * u.values)
    m = mass(u)
    return {
        "energy_kinetic": eb.kinetic,
        "energy_interaction": eb.interaction,
        "energy_total": eb.total,
        "energy_d_lower": eb.d_lower,
        "lambda": lam,
        "grad_residual": math.sqrt(inner(shifted, shifted)) / m,
        "pohozaev": pohozaev_residual(params, nl, kernel, u, lam),
        "nehari_pohozaev": nehari_pohozaev_residual(params, nl, kernel, u),
        "mass": m,
        "grad_norm": math.sqrt(grad_norm_sq(u)),
    }


def fiber_csv_text(curve: FiberCurve) -> str:
    diag = unimodality_report(curve)
    lines = [
        f"# phi_slope_at_tau1 = {curve.phi_at_1_slope!r}",
        f"# n_maxima = {diag.n_maxima}",
        f"# conclusive = {str(diag.conclusive).lower()}",
        "tau,phi,kinetic,interaction,d_lower",
    ]
    d_lower = curve.d_lower
    for i, tau in enumerate(curve.taus):
        dl = float(d_lower[i]) if d_lower is not None else math.nan
        lines.append(
            f"{float(tau)!r},{float(curve.values[i])!r},"
            f"{float(curve.kinetic[i])!r},{float(curve.interaction[i])!r},"
            f"{dl!r}"
        )
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_constants(cfg: dict) -> int:
    params, nl = build_problem(cfg)
    grid = build_grid(cfg, params)
    kernel = build_kernel(grid, params.alpha)
    bundle = build_bundle(params, nl, grid, kernel)
    out_dir = cfg["output_dir"]
    write_json(os.path.join(out_dir, "constants.json"), bundle_payload(bundle))
    echo_config(cfg, out_dir)
    print(os.path.join(out_dir, "constants.json"))
    return 0


def cmd_threshold(cfg: dict) -> int:
    params, nl = build_problem(cfg)
    grid = build_grid(cfg, params)
    kernel = build_kernel(grid, params.alpha)
    bundle = build_bundle(params, nl, grid, kernel)
    if bundle.c0 > 0.0 and params.rho >= bundle.rho0:
        print(
            f"no positive window: rho = {params.rho} is not below "
            f"rho0 = {bundle.rho0}",
            file=sys.stderr,
        )
        return 1

    out_dir = cfg["output_dir"]
    payload = bundle_payload(bundle)
    write_json(os.path.join(out_dir, "threshold.json"), payload)

    n = int(cfg["threshold"]["n_samples"])
    if bundle.r0 is not None:
        ts = np.geomspace(bundle.r0 / 10.0, bundle.r1 * 10.0, n)
    else:
        ts = np.geomspace(1e-2, 1e2, n)  # barrier is the constant 1/2 here
    rows = ["t,h"]
    for t in ts:
        hv = h_value(params.rho, float(t), bundle.c1, bundle.c2, params)
        rows.append(f"{float(t)!r},{hv!r}")
    write_text_atomic(os.path.join(out_dir, "h_curve.csv"),
                      "\n".join(rows) + "\n")
    echo_config(cfg, out_dir)
    print(os.path.join(out_dir, "threshold.json"))
    return 0


def cmd_solve(cfg: dict) -> int:
    params, nl = build_problem(cfg)
    grid = build_grid(cfg, params)
    kernel = build_kernel(grid, params.alpha)
    bundle = build_bundle(params, nl, grid, kernel)
    sv = cfg["solver"]
    opts = SolveOptions(
        max_iters=int(sv["max_iters"]), step0=float(sv["step0"]),
        tol_grad=float(sv["tol_grad"]), n_starts=int(sv["n_starts"]),
        seed=int(sv["seed"]),
        r_cap=None if sv["r_cap"] is None else float(sv["r_cap"]),
    )
    report = solve(params, nl, grid, kernel, bundle, opts)

    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    write_field(os.path.join(out_dir, "u_star.chqf"), report.u_star)

    residuals = residual_block(params, nl, kernel, report.u_star)
    checks = {
        "converged": report.converged,
        "multiplier_positive": residuals["lambda"] > 0.0,
        "mass_matches": abs(residuals["mass"] - params.rho)
        <= 1e-8 * params.rho,
        "inside_ball": residuals["grad_norm"] <= report.r_cap,
        "pohozaev_small": residuals["pohozaev"] < 1e-3,
        "nehari_pohozaev_small": residuals["nehari_pohozaev"] < 1e-3,
    }
    payload = {
        "report": {
            "converged": report.converged,
            "iterations": report.iterations,
            "outside_theory": report.outside_theory,
            "r_cap": report.r_cap,
            "boundary_margin": report.boundary_margin,
            "m_estimate": report.m_estimate,
            "certified_checks": checks,
            "starts": [
                {
                    "label": s.label, "converged": s.converged,
                    "iterations": s.iterations, "energy": s.energy,
                    "grad_residual": s.grad_residual,
                }
                for s in report.starts
            ],
        },
        "residuals": residuals,
        "config": cfg,
        "meta": _meta(),
    }
    write_json(os.path.join(out_dir, "report.json"), payload)

    if cfg["fiber"]["enabled"]:
        fc = cfg["fiber"]
        taus = default_taus(float(fc["tau_min"]), float(fc["tau_max"]),
                            int(fc["n_tau"]))
        curve = fiber_curve(params, nl, kernel, report.u_star, taus)
        write_text_atomic(os.path.join(out_dir, "fiber.csv"),
                          fiber_csv_text(curve))
    echo_config(cfg, out_dir)
    print(os.path.join(out_dir, "report.json"))

    if not report.converged:
        print("solve did not converge", file=sys.stderr)
        return 2
    if report.outside_theory:
        if sv["allow_outside_theory"]:
            return 0
        print(
            "run is outside the certified regime "
            "(set solver.allow_outside_theory to accept it)",
            file=sys.stderr,
        )
        return 2
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        print("certified checks failed: " + ", ".join(failed),
              file=sys.stderr)
        return 2
    return 0


def _load_matching_field(cfg: dict, params, path: str) -> Field:
    field = read_field(path)
    g = field.grid
    want_m = int(cfg["grid"]["m"])
    want_L = float(cfg["grid"]["L"])
    if g.dim != params.N or g.m != want_m or g.L != want_L:
        raise UsageError(
            f"grid mismatch: field is dim={g.dim} m={g.m} L={g.L}, "
            f"config wants dim={params.N} m={want_m} L={want_L}"
        )
    return field


def cmd_fiber(cfg: dict, field_path: str) -> int:
    params, nl = build_problem(cfg)
    field = _load_matching_field(cfg, params, field_path)
    kernel = build_kernel(field.grid, params.alpha)
    fc = cfg["fiber"]
    taus = default_taus(float(fc["tau_min"]), float(fc["tau_max"]),
                        int(fc["n_tau"]))
    curve = fiber_curve(params, nl, kernel, field, taus)
    out_dir = cfg["output_dir"]
    write_text_atomic(os.path.join(out_dir, "fiber.csv"),
                      fiber_csv_text(curve))
    echo_config(cfg, out_dir)
    diag = unimodality_report(curve)
    print(os.path.join(out_dir, "fiber.csv"))
    print(f"maxima detected: {diag.n_maxima}; {diag.detail}")
    return 0


def cmd_verify(cfg: dict, field_path: str) -> int:
    params, nl = build_problem(cfg)
    field = _load_matching_field(cfg, params, field_path)
    kernel = build_kernel(field.grid, params.alpha)
    payload = {
        "residuals": residual_block(params, nl, kernel, field),
        "field": os.path.basename(field_path),
        "grid": {"dim": field.grid.dim, "m": field.grid.m,
                 "L": field.grid.L},
    }
    out_dir = cfg["output_dir"]
    write_json(os.path.join(out_dir, "verify.json"), payload)
    print(json.dumps(_clean(payload), indent=2, sort_keys=True))
    return 0


# ----------------------------------------------------------------------
# Entry point
# ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="JSON config file")
    p.add_argument("--N", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--b", type=int, choices=(0, 1))
    p.add_argument("--rho", type=float)
    p.add_argument("--G", metavar="SPEC",
                   help='nonlinearity, e.g. "0.5*|t|^2.2 + |t|^3" ("0" for none)')
    p.add_argument("--m", type=int, help="grid points per axis")
    p.add_argument("--L", type=float, help="box edge length")
    p.add_argument("--seed", type=int)
    p.add_argument("--starts", type=int, help="number of descent starts")
    p.add_argument("--out", metavar="DIR", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="choqlab",
                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    for name, desc in (
        ("constants", "write the full constant/threshold bundle as JSON"),
        ("threshold", "write threshold JSON plus a barrier-curve CSV"),
        ("solve", "run the local minimization and write artifacts"),
        ("fiber", "sample the dilation curve of a stored field"),
        ("verify", "recompute residuals for a stored field"),
    ):
        p = sub.add_parser(name, help=desc)
        _add_shared_flags(p)
        if name == "solve":
            p.add_argument("--fiber", action="store_true",
                           help="also write fiber.csv for the minimizer")
        if name in ("fiber", "verify"):
            p.add_argument("field", help="CHQF1 field file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args)
        if args.command == "constants":
            return cmd_constants(cfg)
        if args.command == "threshold":
            return cmd_threshold(cfg)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "fiber":
            return cmd_fiber(cfg, args.field)
        if args.command == "verify":
            return cmd_verify(cfg, args.field)
        raise UsageError(f"unknown command {args.command}")
    except UsageError as exc:
        print(f"choqlab: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"choqlab: i/o error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"choqlab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
