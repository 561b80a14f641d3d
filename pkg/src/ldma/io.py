"""Config parsing and result / CSV serialization."""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from . import __version__
from .array import ArrayGeometry
from .beampattern import DesiredPattern, FilterWeights, PolarGrid, desired_on_grid, pattern_on_grid
from .metrics import REPORT_GRID, DesignMetrics
from .optimizer import ConfigError, DesignProblem, DesignResult, Tolerances

POLAR_COLUMNS = ("theta_rad", "B_re", "B_im", "B_abs", "B_desired")
SWEEP_COLUMNS = (
    "f", "DF_proposed", "DF_desired", "pattern_mse", "distortionless_residual", "converged",
)

# Defaults reproduce the second-order, five-microphone design at 1 kHz.
PROBLEM_DEFAULTS = {
    "mics": 5,
    "order": 2,
    "preset": "max-DF",
    "coefficients": None,
    "theta_d": 0.0,
    "frequency": 1000.0,
    "delta_min": 0.0,
    "delta_max": 0.15,
    "sound_speed": 340.0,
    "grid_size": 360,
    "restarts": 8,
    "seed": 0,
    "constraint_tol": 1e-8,
    "objective_tol": 1e-12,
    "max_iterations": 500,
}
SWEEP_DEFAULTS = {"f_min": 100.0, "f_max": 4000.0, "points": 40, "mode": "adaptive"}
_INT_KEYS = {"mics", "order", "grid_size", "restarts", "seed", "max_iterations", "points"}

_ANGLE = re.compile(r"^\s*([-+0-9.eE]+)\s*(deg|rad)?\s*$")


def fmt_csv(x) -> str:
    return format(float(x), ".9g")


def parse_angle(text) -> float:
    """Radians from a number or a string such as ``"60deg"`` / ``"1.2rad"``."""
    if isinstance(text, (int, float)):
        return float(text)
    match = _ANGLE.match(str(text))
    if not match:
        raise ValueError(f"cannot parse angle {text!r}")
    value = float(match.group(1))
    return math.radians(value) if match.group(2) == "deg" else value


def read_json(path) -> dict:
    """Read a JSON object; OSError propagates, bad content raises ConfigError."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON ({exc})"]) from None
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: expected a JSON object"])
    return data


def merge_config(config: dict, overrides: dict, sweep: bool = False) -> dict:
    """Defaults < config file < non-None overrides; unknown keys are errors."""
    allowed = dict(PROBLEM_DEFAULTS)
    if sweep:
        allowed.update(SWEEP_DEFAULTS)
    unknown = sorted(set(config) - set(allowed) - {"out"})
    if unknown:
        raise ConfigError([f"unknown config key {k!r}" for k in unknown])
    merged = {**allowed, **config}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged


def _number(cfg, key, errors):
    value = cfg[key]
    if key == "theta_d":
        try:
            return parse_angle(value)
        except ValueError as exc:
            errors.append(str(exc))
            return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{key} must be a number, got {value!r}")
        return None
    if key in _INT_KEYS and int(value) != value:
        errors.append(f"{key} must be an integer, got {value!r}")
        return None
    return int(value) if key in _INT_KEYS else float(value)


def problem_from_config(cfg: dict) -> DesignProblem:
    """Build and validate a DesignProblem, reporting every violation at once."""
    errors: list[str] = []
    keys = [k for k in PROBLEM_DEFAULTS if k not in ("preset", "coefficients")]
    v = {k: _number(cfg, k, errors) for k in keys}
    desired = None
    if v["order"] is not None and v["theta_d"] is not None:
        try:
            if cfg.get("coefficients") is not None:
                desired = DesiredPattern(v["order"], v["theta_d"], tuple(cfg["coefficients"]))
            else:
                desired = DesiredPattern.from_preset(v["order"], cfg["preset"], v["theta_d"])
        except (TypeError, ValueError) as exc:
            errors.append(f"desired pattern: {exc}")
    grid = None
    if v["grid_size"] is not None:
        try:
            grid = PolarGrid(v["grid_size"])
        except ValueError as exc:
            errors.append(str(exc))
    if errors:
        raise ConfigError(errors)
    return DesignProblem(
        mics=v["mics"],
        desired=desired,
        frequency=v["frequency"],
        delta_min=v["delta_min"],
        delta_max=v["delta_max"],
        sound_speed=v["sound_speed"],
        grid=grid,
        restarts=v["restarts"],
        seed=v["seed"],
        tolerances=Tolerances(v["constraint_tol"], v["objective_tol"], v["max_iterations"]),
    )


def problem_to_config(problem: DesignProblem) -> dict:
    tol = problem.tolerances
    return {
        "mics": problem.mics,
        "order": problem.desired.order,
        "coefficients": list(problem.desired.coefficients),
        "theta_d": problem.desired.steer_angle,
        "frequency": problem.frequency,
        "delta_min": problem.delta_min,
        "delta_max": problem.delta_max,
        "sound_speed": problem.sound_speed,
        "grid_size": problem.grid.size,
        "restarts": problem.restarts,
        "seed": problem.seed,
        "constraint_tol": tol.constraint_tol,
        "objective_tol": tol.objective_tol,
        "max_iterations": tol.max_iterations,
    }


def weights_to_pairs(h) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(h, dtype=complex)]


def pairs_to_weights(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("weights must be a list of [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def result_to_dict(result: DesignResult) -> dict:
    problem = result.problem
    return {
        "problem": problem_to_config(problem),
        "geometry": {
            "spacings": list(result.geometry.spacings),
            "sound_speed": result.geometry.sound_speed,
        },
        "weights": weights_to_pairs(result.weights.weights),
        "frequency": problem.frequency,
        "metrics": result.metrics.to_dict(),
        "objective_value": result.objective_value,
        "converged": result.converged,
        "iterations": result.iterations,
        "restart_index": result.restart_index,
        "message": result.message,
        "provenance": {
            "package": "ldma",
            "version": __version__,
            "solver": "SLSQP",
            "seed": problem.seed,
            "restarts": problem.restarts,
            "tolerances": {
                "constraint_tol": problem.tolerances.constraint_tol,
                "objective_tol": problem.tolerances.objective_tol,
                "max_iterations": problem.tolerances.max_iterations,
            },
            "objective_grid_size": problem.grid.size,
            "metrics_grid_size": REPORT_GRID.size,
        },
    }


def dumps_result(result: DesignResult) -> str:
    # float repr is the shortest string that round-trips (<= 17 significant digits)
    return json.dumps(result_to_dict(result), indent=2) + "\n"


def write_result(result: DesignResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_result(result))
    return path


def load_geometry(data: dict) -> ArrayGeometry:
    geo = data.get("geometry", data)
    return ArrayGeometry(tuple(geo["spacings"]), float(geo.get("sound_speed", 340.0)))


def load_result(path) -> DesignResult:
    data = read_json(path)
    try:
        problem = problem_from_config({**PROBLEM_DEFAULTS, **data["problem"]})
        return DesignResult(
            geometry=load_geometry(data),
            weights=FilterWeights(pairs_to_weights(data["weights"]), data["frequency"]),
            metrics=DesignMetrics(**data["metrics"]),
            objective_value=data["objective_value"],
            converged=data["converged"],
            iterations=data["iterations"],
            restart_index=data["restart_index"],
            problem=problem,
            message=data.get("message", ""),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError([f"{path}: malformed result file ({exc!r})"]) from None


def polar_rows(result: DesignResult, grid: PolarGrid):
    """``(theta, B, B_desired)`` triples for every grid angle."""
    omega = 2.0 * math.pi * result.problem.frequency
    values = pattern_on_grid(result.geometry, result.weights, omega, grid)
    target = desired_on_grid(result.problem.desired, grid)
    return zip(grid.angles, values, target)


def write_polar_csv(result: DesignResult, grid: PolarGrid, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(POLAR_COLUMNS)
        for theta, b, bd in polar_rows(result, grid):
            writer.writerow([fmt_csv(theta), fmt_csv(b.real), fmt_csv(b.imag),
                             fmt_csv(abs(b)), fmt_csv(bd)])
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    """Header and float matrix of a CSV written by this package."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    conv = {"true": 1.0, "false": 0.0}
    body = [[conv[x] if x in conv else float(x) for x in row] for row in rows[1:]]
    return rows[0], np.array(body, dtype=float)
