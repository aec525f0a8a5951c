"""Command-line entry points.

Subcommands: simulate, sweep (sampling|switching), size-inductor, validate.
Exit codes: 0 success, 2 configuration error, 3 simulation/estimator fault,
64 unknown subcommand.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import __version__
from .config import size_clamping_inductor
from .config_io import (parse_config, write_manifest, write_sweep_table,
                        write_timeseries)
from .errors import ConfigError, EstimatorFault, SimulationFault
from .harness import run_scenario, sweep_sampling, sweep_switching

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAULT = 3
EXIT_USAGE = 64

_COMMANDS = ("simulate", "sweep", "size-inductor", "validate")


def _usage(out=None) -> None:
    out = sys.stderr if out is None else out
    print(
        "usage: mmcest <command> [options]\n"
        "\n"
        "commands:\n"
        "  simulate <cfg> [--out DIR] [--kinds conv,comp] [--seed N] [--set k=v]\n"
        "  sweep sampling <cfg> --list f1,f2,... [--out DIR] [--seed N] [--set k=v]\n"
        "  sweep switching <cfg> --list f1,f2,... [--ma-schedule t:ma,...]\n"
        "                        [--out DIR] [--seed N] [--set k=v]\n"
        "  size-inductor --vdiff V --ipmax A --ce F --rsum OHM\n"
        "  validate <cfg>\n",
        file=out)


def _apply_overrides(scenario, args):
    cfg = scenario.cfg
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_overrides(rng_seed=args.seed)
    for item in getattr(args, "set", None) or []:
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key = key.strip()
        if not hasattr(cfg, key):
            raise ConfigError(f"--set: unknown converter field {key!r}")
        current = getattr(cfg, key)
        caster = type(current) if current is not None else float
        if caster is bool:
            val = val.strip().lower() in ("true", "1", "yes", "on")
        else:
            val = caster(val)
        cfg = cfg.with_overrides(**{key: val})
    import dataclasses
    kinds = tuple(k.strip() for k in args.kinds.split(",")) \
        if getattr(args, "kinds", None) else scenario.kind_list
    return dataclasses.replace(scenario, cfg=cfg, kind_list=kinds)


def _cmd_simulate(argv: list[str]) -> int:
    ap = argparse.ArgumentParser(prog="mmcest simulate")
    ap.add_argument("cfg")
    ap.add_argument("--out", default=".")
    ap.add_argument("--kinds", default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--set", action="append", metavar="KEY=VALUE")
    args = ap.parse_args(argv)
    started = time.time()
    scenario = _apply_overrides(parse_config(args.cfg), args)
    result = run_scenario(scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{scenario.name}_timeseries.csv"
    write_timeseries(result, csv_path)
    manifest_path = out / f"{scenario.name}_manifest.json"
    write_manifest(result, [csv_path.name], manifest_path, started_at=started)
    print(f"wrote {csv_path}")
    print(f"wrote {manifest_path}")
    for kind, m in result.metrics.items():
        print(f"{kind}: mean max-error {m.mean_max_err:.3f} V, "
              f"peak {m.peak_max_err:.3f} V (post-convergence)")
    if result.improvement is not None:
        print(f"improvement ratio (compensated vs conventional): "
              f"{result.improvement:.3f}")
    return EXIT_OK


def _cmd_sweep(argv: list[str]) -> int:
    ap = argparse.ArgumentParser(prog="mmcest sweep")
    ap.add_argument("mode", choices=("sampling", "switching"))
    ap.add_argument("cfg")
    ap.add_argument("--list", required=True,
                    help="comma-separated frequencies in Hz")
    ap.add_argument("--ma-schedule", default=None,
                    help="t:ma steps, e.g. 0:0.95,0.5:0.5 (switching mode)")
    ap.add_argument("--out", default=".")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--set", action="append", metavar="KEY=VALUE")
    args = ap.parse_args(argv)
    scenario = _apply_overrides(parse_config(args.cfg), args)
    freqs = [float(x) for x in args.list.split(",") if x.strip()]
    if not freqs:
        raise ConfigError("--list must name at least one frequency")
    if args.mode == "sampling":
        rows = sweep_sampling(scenario, freqs)
        param = "f_sample"
    else:
        schedules = None
        if args.ma_schedule:
            steps = []
            for item in args.ma_schedule.split(","):
                t_s, _, ma = item.partition(":")
                steps.append((float(t_s), float(ma)))
            schedules = [steps]
        rows = sweep_switching(scenario, freqs, schedules)
        param = "f_carrier"
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{scenario.name}_sweep_{args.mode}.csv"
    write_sweep_table(rows, param, path)
    print(f"wrote {path}")
    for row in rows:
        if row.fault:
            print(f"{row.label}: FAULT {row.fault}")
        else:
            errs = ", ".join(f"{k} {v:.3f} V" for k, v in row.mean_err.items())
            print(f"{row.label}: {errs}")
    if any(row.fault for row in rows):
        return EXIT_FAULT
    return EXIT_OK


def _cmd_size_inductor(argv: list[str]) -> int:
    ap = argparse.ArgumentParser(prog="mmcest size-inductor")
    ap.add_argument("--vdiff", type=float, required=True, help="max voltage difference [V]")
    ap.add_argument("--ipmax", type=float, required=True, help="peak current rating [A]")
    ap.add_argument("--ce", type=float, required=True, help="equivalent capacitance [F]")
    ap.add_argument("--rsum", type=float, default=0.0, help="loop resistance [Ohm]")
    args = ap.parse_args(argv)
    l_min = size_clamping_inductor(args.vdiff, args.ipmax, args.ce, args.rsum)
    print(f"{l_min:.6e}")
    return EXIT_OK


def _cmd_validate(argv: list[str]) -> int:
    ap = argparse.ArgumentParser(prog="mmcest validate")
    ap.add_argument("cfg")
    args = ap.parse_args(argv)
    scenario = parse_config(args.cfg)
    cfg = scenario.cfg
    print(f"{args.cfg}: ok")
    print(f"scenario {scenario.name}: {cfg.n_modules_per_arm} modules/arm, "
          f"v_dc {cfg.v_dc} V, f_carrier {cfg.f_carrier} Hz, "
          f"f_sample {cfg.f_sample} Hz, duration {cfg.duration} s, "
          f"kinds {','.join(scenario.kind_list)}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        _usage(sys.stdout if argv else None)
        return EXIT_OK if argv else EXIT_USAGE
    if argv[0] == "--version":
        print(__version__)
        return EXIT_OK
    cmd, rest = argv[0], argv[1:]
    if cmd not in _COMMANDS:
        print(f"mmcest: unknown command {cmd!r}", file=sys.stderr)
        _usage()
        return EXIT_USAGE
    try:
        if cmd == "simulate":
            return _cmd_simulate(rest)
        if cmd == "sweep":
            return _cmd_sweep(rest)
        if cmd == "size-inductor":
            return _cmd_size_inductor(rest)
        return _cmd_validate(rest)
    except ConfigError as exc:
        print(f"mmcest: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationFault, EstimatorFault) as exc:
        print(f"mmcest: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
