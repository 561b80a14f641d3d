"""Frequency sweeps over a design problem template."""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .io import SWEEP_COLUMNS, SWEEP_DEFAULTS, fmt_csv, problem_from_config
from .optimizer import (
    ALIASING_MARGIN,
    ConfigError,
    DesignProblem,
    DesignResult,
    InfeasibleDesignError,
    aliasing_limit,
    solve,
    solve_shared,
)

log = logging.getLogger(__name__)

MIN_SWEEP_FREQUENCY = 100.0
MODES = ("adaptive", "shared")


@dataclass(frozen=True)
class SweepSpec:
    f_min: float
    f_max: float
    points: int
    template: DesignProblem
    mode: str = "adaptive"

    def __post_init__(self):
        errors = []
        if not (0 < self.f_min <= self.f_max):
            errors.append(f"0 < f_min <= f_max required, got {self.f_min}, {self.f_max}")
        if int(self.points) != self.points or self.points < 1:
            errors.append(f"points must be a positive integer, got {self.points}")
        if self.mode not in MODES:
            errors.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if errors:
            raise ConfigError(errors)
        if self.f_min < MIN_SWEEP_FREQUENCY:
            log.warning("f_min %.6g Hz raised to %.6g Hz", self.f_min, MIN_SWEEP_FREQUENCY)
            object.__setattr__(self, "f_min", MIN_SWEEP_FREQUENCY)
            object.__setattr__(self, "f_max", max(self.f_max, MIN_SWEEP_FREQUENCY))

    @property
    def frequencies(self) -> np.ndarray:
        return np.linspace(self.f_min, self.f_max, int(self.points))


@dataclass(frozen=True)
class SweepRow:
    frequency: float
    df_proposed: float
    df_desired: float
    pattern_mse: float
    distortionless_residual: float
    converged: bool
    spacings: tuple[float, ...]
    aliasing_capped: bool = False

    @property
    def df_relative_error(self) -> float:
        return abs(self.df_proposed - self.df_desired) / self.df_desired

    @classmethod
    def from_result(cls, result: DesignResult | None, problem: DesignProblem, capped: bool):
        if result is None:
            nan = math.nan
            return cls(problem.frequency, nan, nan, nan, nan, False,
                       (nan,) * (problem.mics - 1), capped)
        m = result.metrics
        return cls(
            frequency=problem.frequency,
            df_proposed=m.directivity_factor,
            df_desired=m.df_desired,
            pattern_mse=m.pattern_mse,
            distortionless_residual=m.distortionless_residual,
            converged=result.converged,
            spacings=result.geometry.spacings,
            aliasing_capped=capped,
        )


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[SweepRow, ...]
    mode: str = "adaptive"

    @property
    def columns(self) -> tuple[str, ...]:
        n = len(self.rows[0].spacings) if self.rows else 0
        return SWEEP_COLUMNS + tuple(f"delta_{i + 1}" for i in range(n))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for r in self.rows:
            writer.writerow(
                [fmt_csv(r.frequency), fmt_csv(r.df_proposed), fmt_csv(r.df_desired),
                 fmt_csv(r.pattern_mse), fmt_csv(r.distortionless_residual),
                 "true" if r.converged else "false"]
                + [fmt_csv(s) for s in r.spacings]
            )
        return buf.getvalue()

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        return path


def _solve_at(problem: DesignProblem):
    try:
        return solve(problem)
    except InfeasibleDesignError as exc:
        log.warning("%s", exc)
        return exc.best_attempt


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepReport:
    """Solve at every sweep frequency and collect per-frequency metrics.

    In adaptive mode each frequency gets its own geometry and ``delta_max`` is
    lowered below half a wavelength wherever it would alias. Failures are
    kept as rows with ``converged=False``. The report does not depend on
    ``workers``: each solve is deterministic and rows are gathered in
    frequency order.
    """
    freqs = [float(f) for f in spec.frequencies]
    problems = [spec.template.capped(f) for f in freqs]
    capped = [p.delta_max < spec.template.delta_max for p in problems]
    for p, c in zip(problems, capped):
        if c:
            log.info("delta_max capped to %.6g m at %.6g Hz", p.delta_max, p.frequency)

    if spec.mode == "shared":
        try:
            results = solve_shared(spec.template, freqs)
        except InfeasibleDesignError as exc:
            log.warning("%s", exc)
            results = [None] * len(freqs)
        shared_cap = min(p.delta_max for p in problems)
        rows = [
            SweepRow.from_result(r, replace(p, delta_max=shared_cap),
                                 shared_cap < spec.template.delta_max)
            for r, p in zip(results, problems)
        ]
        return SweepReport(tuple(rows), spec.mode)

    if workers > 1 and len(problems) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_at, problems))
    else:
        results = [_solve_at(p) for p in problems]
    rows = [SweepRow.from_result(r, p, c) for r, p, c in zip(results, problems, capped)]
    return SweepReport(tuple(rows), spec.mode)


def spec_from_config(cfg: dict) -> SweepSpec:
    """SweepSpec from a merged config dict (see ``io.merge_config``)."""
    errors = []
    for key in SWEEP_DEFAULTS:
        if key != "mode" and (isinstance(cfg[key], bool) or not isinstance(cfg[key], (int, float))):
            errors.append(f"{key} must be a number, got {cfg[key]!r}")
    if errors:
        raise ConfigError(errors)
    f_min = float(cfg["f_min"])
    start = max(f_min, MIN_SWEEP_FREQUENCY)
    # the template sits at the first frequency; capped() re-derives delta_max per frequency
    delta_max, c = cfg["delta_max"], cfg["sound_speed"]
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (delta_max, c)) and c > 0:
        delta_max = min(delta_max, ALIASING_MARGIN * aliasing_limit(start, c))
    template = problem_from_config({**cfg, "frequency": start, "delta_max": delta_max})
    return SweepSpec(f_min, float(cfg["f_max"]), cfg["points"], template, cfg["mode"])
