"""Command-line interface.

Subcommands: simulate, sweep, optimize, calibrate, lint, fmt, plot. Every
data-producing command written to --out also writes `<out>.manifest.json`
recording the exact invocation, resolved configuration, and output paths,
with no timestamps, so reruns can be reproduced and diffed byte for byte.

Exit codes: 0 success; 1 file I/O failure; 2 parse, validation, or usage
errors (lint violations included); 3 non-finite values during integration;
4 no feasible policy in an optimization grid. Errors go to stderr, colored
when attached to a terminal unless SFDSIM_NO_COLOR is set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .engine import SimConfig, Trajectory, run_simulation
from .errors import (
    ModelError,
    NoFeasiblePolicyError,
    NonFiniteError,
    ParseError,
    SfdError,
)
from .charts import render_chart
from .language import format_model, lint_model, parse_model
from .model import ModelSpec, validate_model
from .plant import build_baseline, summarize
from .scenarios import (
    CalibrationProblem,
    PolicyGrid,
    Scenario,
    apply_scenarios,
    calibrate,
    optimize_transport_policy,
    parse_scenario,
    run_sweep,
)


def _use_color() -> bool:
    return sys.stderr.isatty() and not os.environ.get("SFDSIM_NO_COLOR")


def _error(message: str) -> None:
    if _use_color():
        sys.stderr.write(f"\x1b[31merror:\x1b[0m {message}\n")
    else:
        sys.stderr.write(f"error: {message}\n")


def _load_model(args) -> tuple[ModelSpec, str]:
    if args.model:
        text = Path(args.model).read_text()
        return parse_model(text), args.model
    return build_baseline(), "builtin"


def _load_scenarios(args) -> list[Scenario]:
    out = []
    for path in args.scenario or []:
        out.append(parse_scenario(Path(path).read_text()))
    return out


def _config(args, compiled: bool = False) -> SimConfig:
    return SimConfig(
        t_start=args.t_start,
        t_end=args.t_end,
        dt=args.dt,
        method=args.method,
        seed=args.seed,
        record_every=args.record_every,
        compiled=compiled,
    )


def _write_manifest(args, command: str, spec: ModelSpec, source: str,
                    scenarios: list[Scenario], outputs: list[str]) -> str:
    config = {
        "t_start": args.t_start,
        "t_end": args.t_end,
        "dt": args.dt,
        "method": args.method,
        "seed": args.seed,
        "record_every": args.record_every,
    }
    manifest = {
        "argv": args._argv,
        "command": command,
        "config": config,
        "model": {
            "name": spec.name,
            "source": source,
            "parameters": {p.name: p.value for p in spec.parameters},
        },
        "scenarios": [s.name for s in scenarios],
        "outputs": sorted(outputs),
        "version": __version__,
    }
    path = str(Path(args.out).with_suffix("")) + ".manifest.json"
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _add_sim_flags(p: argparse.ArgumentParser, t_end: float = 365.0) -> None:
    p.add_argument("--model", help="model file; the built-in treatment pond when omitted")
    p.add_argument("--scenario", action="append", metavar="FILE",
                   help="scenario file; repeatable, applied in order")
    p.add_argument("--t-start", type=float, default=0.0, dest="t_start")
    p.add_argument("--t-end", type=float, default=t_end, dest="t_end")
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--method", choices=("euler", "rk4"), default="euler")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--record-every", type=int, default=1, dest="record_every")


def _run_with_scenarios(args) -> tuple[Trajectory, ModelSpec, str, list[Scenario]]:
    spec, source = _load_model(args)
    scenarios = _load_scenarios(args)
    effective = apply_scenarios(spec, scenarios)
    traj = run_simulation(effective, _config(args))
    return traj, effective, source, scenarios


def cmd_simulate(args) -> int:
    traj, spec, source, scenarios = _run_with_scenarios(args)
    csv_text = traj.to_csv()
    if not args.out:
        sys.stdout.write(csv_text)
        return 0
    Path(args.out).write_text(csv_text)
    outputs = [args.out]
    if args.events_out:
        Path(args.events_out).write_text(traj.events_to_csv())
        outputs.append(args.events_out)
    manifest = _write_manifest(args, "simulate", spec, source, scenarios, outputs)
    for path in outputs + [manifest]:
        print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    spec, source = _load_model(args)
    scenarios = _load_scenarios(args)
    effective = apply_scenarios(spec, scenarios)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ValueError("--values must list at least one number")
    result = run_sweep(effective, args.param, values, _config(args))
    csv_text = result.to_csv()
    if not args.out:
        sys.stdout.write(csv_text)
        return 0
    Path(args.out).write_text(csv_text)
    manifest = _write_manifest(args, "sweep", effective, source, scenarios, [args.out])
    print(f"wrote {args.out}")
    print(f"wrote {manifest}")
    return 0


def cmd_optimize(args) -> int:
    spec, source = _load_model(args)
    scenarios = _load_scenarios(args)
    effective = apply_scenarios(spec, scenarios)
    grid = PolicyGrid(
        intervals=tuple(float(v) for v in args.intervals.split(",")),
        truck_capacities=tuple(float(v) for v in args.trucks.split(",")),
        truck_counts=tuple(float(v) for v in args.counts.split(",")),
        sludge_limit_kg=args.sludge_limit,
    )
    result = optimize_transport_policy(effective, grid, _config(args))
    best = result.best
    print(
        f"best: interval={best.interval:g} truckKg={best.truck_capacity_kg:g} "
        f"trucks={best.trucks:g} totalCost={best.total_cost:.6f} "
        f"peakSludge={best.peak_sludge:.6f}"
    )
    if args.out:
        Path(args.out).write_text(result.to_csv())
        manifest = _write_manifest(args, "optimize", effective, source, scenarios, [args.out])
        print(f"wrote {args.out}")
        print(f"wrote {manifest}")
    return 0


def _read_observed(path: str) -> tuple[tuple[float, ...], tuple[float, ...]]:
    times: list[float] = []
    values: list[float] = []
    for i, line in enumerate(Path(path).read_text().splitlines()):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) < 2:
            raise ParseError("expected 't,value' rows", i + 1, 1)
        try:
            t, v = float(parts[0]), float(parts[1])
        except ValueError:
            if i == 0:
                continue  # header row
            raise ParseError("expected numeric 't,value' rows", i + 1, 1) from None
        times.append(t)
        values.append(v)
    if not times:
        raise ParseError("no observations found", 1, 1)
    return tuple(times), tuple(values)


def cmd_calibrate(args) -> int:
    spec, source = _load_model(args)
    scenarios = _load_scenarios(args)
    effective = apply_scenarios(spec, scenarios)
    names: list[str] = []
    bounds: list[tuple[float, float]] = []
    for item in args.param:
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"--param must be NAME:LO:HI, got {item!r}")
        names.append(parts[0])
        bounds.append((float(parts[1]), float(parts[2])))
    times, values = _read_observed(args.observed)
    problem = CalibrationProblem(
        param_names=tuple(names),
        bounds=tuple(bounds),
        column=args.column,
        observed_times=times,
        observed_values=values,
    )
    result = calibrate(effective, problem, _config(args),
                       tol=args.tol, max_passes=args.max_passes)
    payload = {
        "params": result.params,
        "sse": result.sse,
        "passes": result.passes,
        "evaluations": result.evaluations,
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
        manifest = _write_manifest(args, "calibrate", effective, source, scenarios, [args.out])
        print(f"wrote {args.out}")
        print(f"wrote {manifest}")
    return 0


def cmd_lint(args) -> int:
    issues = lint_model(Path(args.file).read_text())
    for issue in issues:
        print(f"{args.file}:{issue}")
    return 2 if issues else 0


def cmd_fmt(args) -> int:
    text = format_model(parse_model(Path(args.file).read_text()))
    if args.write:
        Path(args.file).write_text(text)
        print(f"wrote {args.file}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_plot(args) -> int:
    traj, spec, _source, _scenarios = _run_with_scenarios(args)
    if args.columns:
        columns = [c.strip() for c in args.columns.split(",") if c.strip()]
    else:
        columns = [s.name for s in spec.stocks]
    svg = render_chart(traj, columns, title=args.title)
    if args.out:
        Path(args.out).write_text(svg)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(svg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfdsim",
        description="Stock-flow simulation of a vinasse treatment pond, "
                    "plus model language tooling.",
    )
    parser.add_argument("--version", action="version", version=f"sfdsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a model and emit trajectory CSV")
    _add_sim_flags(p)
    p.add_argument("--out", help="trajectory CSV path; stdout when omitted")
    p.add_argument("--events-out", dest="events_out", help="event log CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="simulate across values of one parameter")
    _add_sim_flags(p)
    p.add_argument("--param", required=True, help="parameter name to sweep")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", help="sweep CSV path; stdout when omitted")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="search sludge pickup policies")
    _add_sim_flags(p)
    p.add_argument("--intervals", default="15,30,45,60", help="days between pickups")
    p.add_argument("--trucks", default="3000,6000", help="truck capacities in kg")
    p.add_argument("--counts", default="1,2", help="trucks per pickup")
    p.add_argument("--sludge-limit", type=float, default=6000.0, dest="sludge_limit",
                   help="feasibility cap on peak sludge in kg")
    p.add_argument("--out", help="ranked policy CSV path")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("calibrate", help="fit parameters to an observed series")
    _add_sim_flags(p)
    p.add_argument("--param", action="append", required=True, metavar="NAME:LO:HI",
                   help="parameter and bounds; repeatable")
    p.add_argument("--column", required=True, help="trajectory column to match")
    p.add_argument("--observed", required=True, help="CSV of t,value observations")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-passes", type=int, default=200, dest="max_passes")
    p.add_argument("--out", help="result JSON path")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("lint", help="check a model file's naming conventions")
    p.add_argument("file")
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("fmt", help="canonically format a model file")
    p.add_argument("file")
    p.add_argument("--write", action="store_true", help="rewrite the file in place")
    p.set_defaults(func=cmd_fmt)

    p = sub.add_parser("plot", help="render trajectory columns as an SVG chart")
    _add_sim_flags(p)
    p.add_argument("--columns", help="comma-separated columns; stocks when omitted")
    p.add_argument("--title", help="chart title")
    p.add_argument("--out", help="SVG path; stdout when omitted")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    effective = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(effective)
    args._argv = effective
    try:
        return args.func(args)
    except NonFiniteError as err:
        _error(str(err))
        return 3
    except NoFeasiblePolicyError as err:
        _error(str(err))
        return 4
    except KeyError as err:
        # Unknown column names surface as mapping lookups.
        _error(err.args[0] if err.args else str(err))
        return 2
    except (ParseError, ModelError, SfdError, ValueError) as err:
        _error(str(err))
        return 2
    except OSError as err:
        _error(str(err))
        return 1


if __name__ == "__main__":
    sys.exit(main())
