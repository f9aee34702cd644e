"""Command-line entry point.

Every subcommand validates its flags, makes one library call and writes CSV
files whose paths are echoed on standard output.  Exit codes: 0 success,
1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import experiments
from .core import MacroState, ModelKind, ModelParameters, RiemannInitial, SimulationConfig
from .macro_solver import run_macro
from .micro import FollowModel, MicroConfig, run_micro

log = logging.getLogger("kintraffic")


class ConfigError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


_PARAM_KEYS = {f.name for f in fields(ModelParameters)}
_RUN_KEYS = {"model", "rho_l", "u_l", "rho_r", "u_r", "x0", "dx", "t_end", "cfl",
             "x_lo", "x_hi", "boundary", "coefficients"}
_RUN_DEFAULTS = dict(model="ar", rho_l=0.5, u_l=1.0, rho_r=0.5, u_r=0.0, x0=0.5,
                     dx=0.01, t_end=0.2, cfl=0.5, x_lo=0.0, x_hi=1.0,
                     boundary="outflow", coefficients="simplified")
_TEXT_KEYS = {"model", "boundary", "coefficients"}


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (part.strip() for part in line.partition("="))
            if not sep or not key or not value:
                raise ConfigError(path, lineno, f"expected 'key = value', got {raw.strip()!r}")
            if key not in _RUN_KEYS | _PARAM_KEYS:
                raise ConfigError(path, lineno, f"unknown key {key!r}")
            if key in _TEXT_KEYS:
                values[key] = value
                continue
            try:
                values[key] = int(value) if key == "eta" else float(value)
            except ValueError:
                raise ConfigError(path, lineno, f"{key} needs a number, got {value!r}") from None
    return values


def build_config(values: dict) -> SimulationConfig:
    merged = {**_RUN_DEFAULTS, **{k: v for k, v in values.items() if k in _RUN_KEYS}}
    params = ModelParameters(**{k: v for k, v in values.items() if k in _PARAM_KEYS})
    lo, hi = merged["x_lo"], merged["x_hi"]
    return SimulationConfig(
        model=ModelKind(merged["model"]), params=params, domain=(lo, hi),
        n_cells=int(round((hi - lo) / merged["dx"])), t_end=merged["t_end"],
        cfl_number=merged["cfl"],
        initial_condition=RiemannInitial(merged["rho_l"], merged["u_l"], merged["rho_r"],
                                         merged["u_r"], merged["x0"]),
        boundary=merged["boundary"], coefficients=merged["coefficients"])


def load_config(path) -> SimulationConfig:
    """Simulation config from a flat key-value file on top of the defaults."""
    return build_config(read_config(path))


def _positive(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kintraffic", description=(
        "Aw-Rascle-type and Hamilton-Jacobi traffic models: Riemann presets, "
        "exact solutions, car-following runs and convergence studies."))
    parser.add_argument("--quiet", action="store_true", help="suppress progress lines")
    sub = parser.add_subparsers(dest="command", metavar="{run,preset,oracle,micro,converge}")
    sub.required = True

    run = sub.add_parser("run", help="custom Riemann problem")
    run.add_argument("--config", type=Path, help="key = value file, overridden by flags")
    run.add_argument("--model", choices=[m.value for m in ModelKind])
    for name in ("rho-l", "u-l", "rho-r", "u-r", "x0", "x-lo", "x-hi"):
        run.add_argument(f"--{name}", type=float)
    run.add_argument("--dx", type=_positive)
    run.add_argument("--t-end", type=float)
    run.add_argument("--cfl", type=_positive, help="CFL number in (0, 0.5], default 0.5")
    run.add_argument("--out", type=Path, required=True)

    pre = sub.add_parser("preset", help="built-in Riemann examples at both resolutions")
    pre.add_argument("--id", required=True, choices=experiments.PRESET_IDS)
    pre.add_argument("--models", nargs="+", choices=[m.value for m in ModelKind])
    pre.add_argument("--dx", nargs="+", type=_positive, help="default: 0.01 0.001")
    pre.add_argument("--cfl", type=_positive, default=0.45)
    pre.add_argument("--out", type=Path, default=Path("."))

    ora = sub.add_parser("oracle", help="exact Aw-Rascle solution of a preset")
    ora.add_argument("--id", required=True, choices=experiments.PRESET_IDS)
    ora.add_argument("--t", type=float, required=True)
    ora.add_argument("--dx", type=_positive, default=0.001)
    ora.add_argument("--out", type=Path, required=True)

    mic = sub.add_parser("micro", help="car-following run from preset data")
    mic.add_argument("--model", required=True, choices=[m.value for m in FollowModel])
    mic.add_argument("--n", type=int, required=True)
    mic.add_argument("--id", default="ex1", choices=experiments.PRESET_IDS)
    mic.add_argument("--t-end", type=float)
    mic.add_argument("--dx", type=_positive, default=0.001, help="reconstruction grid")
    mic.add_argument("--out", type=Path, required=True)

    con = sub.add_parser("converge", help="self-convergence study on smooth data")
    con.add_argument("--model", required=True, choices=[m.value for m in ModelKind])
    con.add_argument("--levels", type=int, default=3)
    con.add_argument("--base-cells", type=int, default=100)
    con.add_argument("--t-end", type=float, default=0.1)
    con.add_argument("--profile", choices=("advection", "wave", "constant"), default="wave")
    con.add_argument("--cfl", type=_positive, default=0.45)
    return parser


def _run_values(args, parser) -> dict:
    values = {}
    if args.config is not None:
        try:
            values.update(read_config(args.config))
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        except ConfigError as exc:
            parser.error(str(exc))
    for flag in ("model", "rho_l", "u_l", "rho_r", "u_r", "x0", "x_lo", "x_hi", "dx",
                 "t_end", "cfl"):
        value = getattr(args, flag)
        if value is not None:
            values[flag] = value
    merged = {**_RUN_DEFAULTS, **values}
    for side in ("rho_l", "rho_r"):
        if not 0 <= merged[side] < 1 / values.get("H", 1.0):
            parser.error(f"--{side.replace('_', '-')} must satisfy 0 <= rho < rho_max "
                         f"(got {merged[side]})")
    if not 0 < merged["cfl"] <= 0.5:
        parser.error(f"--cfl must lie in (0, 0.5] (got {merged['cfl']})")
    if merged["t_end"] < 0:
        parser.error("--t-end must be non-negative")
    if not merged["x_lo"] < merged["x0"] < merged["x_hi"]:
        parser.error("--x0 must lie strictly inside the domain")
    return values


def main(argv=None) -> int:
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                            format="%(message)s", stream=sys.stderr, force=True)
        return _dispatch(args, parser)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args, parser) -> int:
    if args.command == "run":
        config = build_config(_run_values(args, parser))
        result = run_macro(config)
        log.info("%s: %d steps, %.2fs", config.model.value, result.steps, result.wall_time)
        args.out.parent.mkdir(parents=True, exist_ok=True)
        print(experiments.write_csv([(config.model.value, result.final)], args.out,
                                    config.params))
        return 0

    if args.command == "preset":
        case = experiments.preset(args.id)
        report = experiments.run_comparison(case, args.models, args.dx, out_dir=args.out,
                                            cfl_number=args.cfl)
        for (a, b, dx), (l1, linf) in sorted(report.distances.items(), key=str):
            log.info("dx=%g %s vs %s: L1=%.3e Linf=%.3e", dx, a, b, l1, linf)
        for path in report.csv_paths:
            print(path)
        for dx in args.dx or case.resolutions:
            state = experiments.oracle_state(case, case.t_end, dx)
            path = args.out / f"{case.id}_oracle_{experiments.format_dx(dx)}.csv"
            print(experiments.write_csv([("oracle", state)], path))
        for key, why in report.failures.items():
            print(f"error: {key[0].value} dx={key[1]:g}: {why}", file=sys.stderr)
        return 1 if report.partial else 0

    if args.command == "oracle":
        if args.t < 0:
            parser.error("--t must be non-negative")
        state = experiments.oracle_state(args.id, args.t, args.dx)
        args.out.parent.mkdir(parents=True, exist_ok=True)
        print(experiments.write_csv([("oracle", state)], args.out))
        return 0

    if args.command == "micro":
        if args.n < 2:
            parser.error("--n must be at least 2")
        case = experiments.preset(args.id)
        lo, hi = case.domain
        t_end = case.t_end if args.t_end is None else args.t_end
        config = MicroConfig(model=FollowModel(args.model), n_cars=args.n,
                             initial=case.initial, domain=case.domain, t_end=t_end,
                             n_cells=int(round((hi - lo) / args.dx)))
        result = run_micro(config)
        log.info("micro %s N=%d: %d steps, %.2fs", args.model, args.n, result.steps,
                 result.wall_time)
        rho, u = result.fields[-1]
        state = MacroState(lo, (hi - lo) / config.n_cells, rho, rho * u, t=t_end)
        args.out.parent.mkdir(parents=True, exist_ok=True)
        print(experiments.write_csv([(f"micro-{args.model}", state)], args.out))
        return 0

    if args.command == "converge":
        if args.levels < 3:
            parser.error("--levels must be at least 3")
        result = experiments.convergence_study(
            args.model, experiments.smooth_profile(args.profile), args.levels,
            base_cells=args.base_cells, t_end=args.t_end, cfl_number=args.cfl)
        print("cells,l1_difference,l1_difference_excluded")
        for n, e, ex in zip(result.cells, result.errors, result.excluded_errors):
            print(f"{n},{e:.6e},{ex:.6e}")
        print(f"mean order {result.mean_order:.3f}; "
              f"extremum-excluded {result.mean_excluded_order:.3f}")
        return 0
    raise AssertionError(args.command)
