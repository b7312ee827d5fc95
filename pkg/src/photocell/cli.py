"""
Command-line front end: ``photocell simulate | fit | validate | sweep``.

Exit codes: 0 success, 2 bad input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    ModelParameters,
    NumericalError,
    ValidationError,
    csv_text,
    format_parameters,
    format_profile,
    load_dataset,
    load_parameters,
    load_profile,
    write_text,
)
from .electrochem import polarization_csv, polarization_sweep, power_csv
from .estimation import fit_dataset, validate
from .sensitivity import SWEEP_PARAMETERS, SweepSpec, run_sweep

log = logging.getLogger("photocell")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3

# constant K used by sweeps when no profile is available
DEFAULT_SWEEP_K = 1e-4

VALIDATION_COLUMNS = ("r_ext_ohm", "k_per_m2", "v_exp_volt", "v_model_volt",
                      "i_exp_amp", "i_model_amp")


def parse_loads(text: str) -> list:
    """``log:start:stop:count`` geometric grid, or a comma list (brackets optional)."""
    text = text.strip()
    if text.startswith("log:"):
        try:
            _, start, stop, count = text.split(":")
            start, stop, count = float(start), float(stop), int(count)
        except ValueError:
            raise ValidationError(f"bad load grid {text!r}; expected log:start:stop:count") from None
        if not (start > 0 and stop > 0 and count >= 1):
            raise ValidationError(f"bad load grid {text!r}; bounds must be > 0 and count >= 1")
        return [float(r) for r in np.geomspace(start, stop, count)]
    try:
        loads = [float(s) for s in text.strip("[]").split(",") if s.strip()]
    except ValueError:
        raise ValidationError(f"bad load list {text!r}") from None
    if not loads or not all(r > 0 for r in loads):
        raise ValidationError(f"loads must be positive numbers, got {text!r}")
    return loads


def parse_values(text: str) -> list:
    try:
        values = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ValidationError(f"bad value list {text!r}") from None
    if not values:
        raise ValidationError("at least one sweep value is required")
    return values


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Collects outputs of one command and writes its manifest."""

    def __init__(self, command: str, args: argparse.Namespace, params: ModelParameters):
        self.command = command
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.params = params
        self.arguments = {k: v for k, v in sorted(vars(args).items())
                          if k not in ("func", "out") and v is not None}
        self.inputs = {}
        self.outputs = []
        self.extra = {}
        self.started = time.perf_counter()

    def add_input(self, path):
        self.inputs[str(path)] = _digest(path)

    def write(self, name: str, text: str):
        write_text(self.out / name, text)
        self.outputs.append(name)

    def finish(self):
        manifest = {
            "command": self.command,
            "version": __version__,
            "parameters": format_parameters(self.params),
            "arguments": self.arguments,
            "inputs": self.inputs,
            "outputs": self.outputs,
            **self.extra,
            "duration_s": time.perf_counter() - self.started,
        }
        write_text(self.out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _params(args) -> ModelParameters:
    return load_parameters(args.params) if args.params else ModelParameters()


def _k_source(args):
    if args.k is not None and args.k_profile is not None:
        raise ValidationError("give only one of --k and --k-profile")
    if args.k_profile is not None:
        return load_profile(args.k_profile)
    if args.k is None:
        raise ValidationError("give either --k or --k-profile")
    if not args.k >= 0:
        raise ValidationError(f"--k must be >= 0, got {args.k!r}")
    return args.k


def cmd_simulate(args) -> int:
    params = _params(args)
    loads = parse_loads(args.loads)
    k_source = _k_source(args)
    run = Run("simulate", args, params)
    for path in (args.params, args.k_profile):
        if path:
            run.add_input(path)
    points = polarization_sweep(loads, k_source, params, args.dwell)
    run.write("polarization.csv", polarization_csv(points))
    run.write("power.csv", power_csv(points))
    run.finish()
    return EXIT_OK


def cmd_fit(args) -> int:
    params = _params(args)
    data = load_dataset(args.data)
    run = Run("fit", args, params)
    for path in (args.params, args.data):
        if path:
            run.add_input(path)
    report = fit_dataset(data, params, args.dwell, (0.0, args.k_max))
    run.write("fit_report.csv", report.to_csv())
    run.write("k_profile.csv", format_profile(report.profile))
    prof = report.profile
    if prof.breakpoint_index is not None:
        summary = csv_text(("breakpoint_r_ext", "slope_low", "slope_high"),
                           [(prof.r_ext[prof.breakpoint_index], *prof.slopes)])
    else:
        summary = "breakpoint_r_ext,slope_low,slope_high\n"
    run.write("regimes.csv", summary)
    run.extra["train_rmse"] = report.train_rmse
    run.finish()
    print(f"train RMSE: {report.train_rmse:.11e}")
    if prof.breakpoint_index is not None:
        print(f"regimes: breakpoint_r_ext={prof.r_ext[prof.breakpoint_index]:.6g} "
              f"slope_low={prof.slopes[0]:.6g} slope_high={prof.slopes[1]:.6g}")
    return EXIT_OK


def cmd_validate(args) -> int:
    params = _params(args)
    data = load_dataset(args.data)
    profile = load_profile(args.profile)
    run = Run("validate", args, params)
    for path in (args.params, args.data, args.profile):
        if path:
            run.add_input(path)
    report = validate(data, profile, params, args.dwell)
    run.write("validation.csv", csv_text(
        VALIDATION_COLUMNS,
        ((p.r_ext, p.k, p.v_exp, p.v_model, p.i_exp, p.i_model) for p in report.points)))
    run.extra["test_rmse"] = report.test_rmse
    run.finish()
    print(f"test RMSE: {report.test_rmse:.11e}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMETERS:
        raise ValidationError(f"unknown parameter {args.param!r}; valid names: "
                              f"{', '.join(SWEEP_PARAMETERS)}")
    params = _params(args)
    if args.k is None and args.k_profile is None:
        # prefer a profile left by an earlier 'fit' into the same directory
        fitted = Path(args.out) / "k_profile.csv"
        if fitted.is_file():
            args.k_profile = str(fitted)
        else:
            args.k = DEFAULT_SWEEP_K
    spec = SweepSpec(args.param, tuple(parse_values(args.values)),
                     tuple(parse_loads(args.loads)), _k_source(args))
    run = Run("sweep", args, params)
    for path in (args.params, args.k_profile):
        if path:
            run.add_input(path)
    curves = run_sweep(spec, params, args.dwell, workers=args.workers)
    for value, points in curves.items():
        run.write(f"sweep_{spec.parameter}_{value!r}.csv", polarization_csv(points))
    run.extra["k_source"] = spec.k_description
    run.extra["curves"] = {f"{v!r}": f"sweep_{spec.parameter}_{v!r}.csv" for v in spec.values}
    run.finish()
    return EXIT_OK


def replay_argv(manifest: dict, params_file, out) -> list:
    """Command line that re-runs a manifest's command from its parameter snapshot.

    The snapshot must first be written to ``params_file``; input files are
    read from the paths recorded in the manifest.
    """
    argv = [manifest["command"], "--params", str(params_file), "--out", str(out)]
    for key, value in manifest["arguments"].items():
        if key in ("command", "params"):
            continue
        argv += [f"--{key.replace('_', '-')}", value if isinstance(value, str) else repr(value)]
    return argv


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="parameter file (key = value); defaults if omitted")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--dwell", type=float, default=0.0,
                        help="growth time between consecutive loads, s (default 0)")

    k_opts = argparse.ArgumentParser(add_help=False)
    k_opts.add_argument("--k", type=float, help="constant rate constant K, 1/m2")
    k_opts.add_argument("--k-profile", help="K profile CSV (r_ext_ohm,k_per_m2)")

    parser = argparse.ArgumentParser(prog="photocell",
                                     description="Micro photosynthetic power cell model.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common, k_opts], help="polarization and power curves")
    p.add_argument("--loads", required=True, help="log:start:stop:count or r1,r2,...")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit K per train record")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--k-max", type=float, default=1e3, help="upper bound on K, 1/m2")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("validate", parents=[common], help="predict test records")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--profile", required=True, help="K profile CSV from 'fit'")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", parents=[common, k_opts], help="one-parameter sensitivity sweep")
    p.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMETERS)}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--loads", default="log:100:1e6:32", help="load grid (default log:100:1e6:32)")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
