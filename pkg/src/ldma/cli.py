"""Command line entry point: ``ldma {design,sweep,eval,presets,export-polar}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .beampattern import DesiredPattern, PolarGrid, presets_for_order, preset_coefficients
from .io import (
    PROBLEM_DEFAULTS,
    load_geometry,
    load_result,
    merge_config,
    pairs_to_weights,
    parse_angle,
    problem_from_config,
    read_json,
    write_polar_csv,
    write_result,
)
from .metrics import desired_directivity_factor, evaluate_design
from .optimizer import ConfigError, InfeasibleDesignError, solve
from .sweep import run_sweep, spec_from_config

EXIT_OK, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4
EXPORT_GRID = 360


def _design_overrides(args) -> dict:
    return {
        "frequency": args.freq,
        "theta_d": args.theta_d,
        "order": args.order,
        "mics": args.mics,
        "delta_max": args.delta_max,
        "preset": args.preset,
        "restarts": args.restarts,
        "seed": args.seed,
    }


def _load_config(path) -> dict:
    return read_json(path) if path else {}


def cmd_design(args) -> int:
    cfg = _load_config(args.config)
    overrides = _design_overrides(args)
    if args.preset is not None:
        overrides["coefficients"] = None
        cfg.pop("coefficients", None)
    merged = merge_config(cfg, overrides)
    problem = problem_from_config(merged)
    out = Path(args.out or merged.get("out") or ".")
    try:
        result = solve(problem)
    except InfeasibleDesignError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if exc.best_attempt is not None:
            write_result(exc.best_attempt, out / "result.json")
            m = exc.best_attempt.metrics
            print(f"best attempt: mse={m.pattern_mse:.3e} "
                  f"residual={m.distortionless_residual:.3e} "
                  f"spacing_violation={m.max_spacing_violation:.3e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    write_result(result, out / "result.json")
    write_polar_csv(result, PolarGrid(EXPORT_GRID), out / "polar.csv")
    m = result.metrics
    print(f"converged (restart {result.restart_index}, {result.iterations} iterations)")
    print(f"  pattern MSE          {m.pattern_mse:.6e}")
    print(f"  DF proposed/desired  {m.directivity_factor:.6f} / {m.df_desired:.6f}")
    print(f"  distortionless res.  {m.distortionless_residual:.3e}")
    print(f"  spacings [m]         {', '.join(f'{s:.6f}' for s in result.geometry.spacings)}")
    print(f"wrote {out / 'result.json'} and {out / 'polar.csv'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    overrides = {
        "f_min": args.fmin, "f_max": args.fmax, "points": args.points, "mode": args.mode,
        "theta_d": args.theta_d, "seed": args.seed, "restarts": args.restarts,
    }
    merged = merge_config(cfg, overrides, sweep=True)
    spec = spec_from_config(merged)
    report = run_sweep(spec, workers=args.workers)
    out = Path(args.out or merged.get("out") or ".")
    path = report.write_csv(out / "sweep.csv")
    failed = [r.frequency for r in report.rows if not r.converged]
    worst = max(r.pattern_mse for r in report.rows)
    print(f"{len(report.rows)} frequencies, worst MSE {worst:.3e}, {len(failed)} not converged")
    print(f"wrote {path}")
    return EXIT_INFEASIBLE if failed else EXIT_OK


def cmd_eval(args) -> int:
    geometry = load_geometry(read_json(args.geometry))
    wdata = read_json(args.weights)
    weights = pairs_to_weights(wdata["weights"])
    theta_d = parse_angle(args.theta_d)
    if args.coefficients:
        coeffs = [float(x) for x in args.coefficients.split(",")]
        desired = DesiredPattern(len(coeffs) - 1, theta_d, tuple(coeffs))
    else:
        desired = DesiredPattern.from_preset(args.order, args.preset, theta_d)
    metrics = evaluate_design(
        geometry, weights, args.freq, desired, args.delta_min, args.delta_max
    )
    print(json.dumps(metrics.to_dict(), indent=2))
    return EXIT_OK


def cmd_presets(args) -> int:
    print(f"{'family':<16} {'DF':>10}  coefficients (a_0 .. a_{args.order})")
    for family in presets_for_order(args.order):
        a = preset_coefficients(args.order, family)
        df = desired_directivity_factor(DesiredPattern(args.order, 0.0, tuple(a)))
        print(f"{family:<16} {df:>10.6f}  [{', '.join(f'{x:.6g}' for x in a)}]")
    return EXIT_OK


def cmd_export_polar(args) -> int:
    result = load_result(args.result)
    out = Path(args.out) if args.out else Path(args.result).with_name("polar.csv")
    write_polar_csv(result, PolarGrid(args.grid_size), out)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldma", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="optimize weights and spacings at one frequency")
    p.add_argument("--config")
    p.add_argument("--freq", type=float)
    p.add_argument("--theta-d", help="look direction, radians or e.g. '60deg'")
    p.add_argument("--order", type=int)
    p.add_argument("--mics", type=int)
    p.add_argument("--delta-max", type=float)
    p.add_argument("--preset")
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("sweep", help="design at each frequency of a sweep")
    p.add_argument("--config")
    p.add_argument("--fmin", type=float)
    p.add_argument("--fmax", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--mode", choices=("adaptive", "shared"))
    p.add_argument("--theta-d")
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="metrics of a given geometry and weight vector")
    p.add_argument("--geometry", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--freq", type=float, required=True)
    p.add_argument("--theta-d", required=True)
    p.add_argument("--order", type=int, default=PROBLEM_DEFAULTS["order"])
    p.add_argument("--preset", default="max-DF")
    p.add_argument("--coefficients", help="comma separated a_0,...,a_N")
    p.add_argument("--delta-min", type=float, default=0.0)
    p.add_argument("--delta-max", type=float, default=math.inf)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("presets", help="list desired-pattern presets for an order")
    p.add_argument("--order", type=int, required=True)
    p.set_defaults(func=cmd_presets)

    p = sub.add_parser("export-polar", help="write the polar CSV of a stored result")
    p.add_argument("--result", required=True)
    p.add_argument("--grid-size", type=int, default=EXPORT_GRID)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_polar)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"invalid: {v}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (KeyError, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
