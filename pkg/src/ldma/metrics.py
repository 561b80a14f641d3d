"""Directivity factor, beampattern MSE and constraint diagnostics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .array import ArrayGeometry, steering_vector
from .beampattern import (
    DesiredPattern,
    PolarGrid,
    _check_dims,
    _weights,
    desired_on_grid,
    pattern_on_grid,
    synthesized_pattern,
)

REPORT_GRID = PolarGrid(3600)
FEASIBILITY_TOL = 1e-9


class DegenerateDesignError(ValueError):
    """The pattern has zero power, so its directivity factor is undefined."""


@dataclass(frozen=True)
class DesignMetrics:
    directivity_factor: float
    df_desired: float
    pattern_mse: float
    distortionless_residual: float
    max_spacing_violation: float

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def df_relative_error(self) -> float:
        return abs(self.directivity_factor - self.df_desired) / self.df_desired


def _df_from_values(look_value, values):
    mean_power = float(np.mean(np.abs(values) ** 2))
    if not mean_power > 0:
        raise DegenerateDesignError("pattern has zero mean power")
    return abs(look_value) ** 2 / mean_power


def _mse_from_values(values, target):
    return float(np.mean(np.abs(np.asarray(values) - np.asarray(target)) ** 2))


def directivity_factor(
    geometry: ArrayGeometry, h, omega: float, theta_d: float, grid: PolarGrid = REPORT_GRID
) -> float:
    """Look-direction power over angular-mean power (linear ratio)."""
    look = synthesized_pattern(geometry, h, omega, theta_d)
    return _df_from_values(look, pattern_on_grid(geometry, h, omega, grid))


def desired_directivity_factor(p: DesiredPattern, grid: PolarGrid = REPORT_GRID) -> float:
    return _df_from_values(math.fsum(p.coefficients), desired_on_grid(p, grid))


def pattern_mse(
    geometry: ArrayGeometry, h, omega: float, p: DesiredPattern, grid: PolarGrid = REPORT_GRID
) -> float:
    """Angular mean of ``|B(theta) - B_d(theta)|**2`` on ``grid``."""
    return _mse_from_values(pattern_on_grid(geometry, h, omega, grid), desired_on_grid(p, grid))


def distortionless_residual(geometry: ArrayGeometry, h, omega: float, theta_d: float) -> float:
    """``|d(omega, theta_d)^H h - 1|``."""
    h = _weights(h)
    _check_dims(geometry, h)
    d = steering_vector(geometry, omega, theta_d)
    return abs(np.vdot(d, h) - 1.0)


def max_spacing_violation(spacings, delta_min: float, delta_max: float) -> float:
    """Largest bound excess in metres; zero when every spacing is in range."""
    s = np.asarray(spacings, dtype=float)
    if s.size == 0:
        return 0.0
    return float(max(np.max(s - delta_max), np.max(delta_min - s), 0.0))


def evaluate_design(
    geometry: ArrayGeometry,
    h,
    frequency: float,
    desired: DesiredPattern,
    delta_min: float = 0.0,
    delta_max: float = math.inf,
    grid: PolarGrid = REPORT_GRID,
) -> DesignMetrics:
    omega = 2.0 * math.pi * frequency
    theta_d = desired.steer_angle
    return DesignMetrics(
        directivity_factor=directivity_factor(geometry, h, omega, theta_d, grid),
        df_desired=desired_directivity_factor(desired, grid),
        pattern_mse=pattern_mse(geometry, h, omega, desired, grid),
        distortionless_residual=distortionless_residual(geometry, h, omega, theta_d),
        max_spacing_violation=max_spacing_violation(geometry.spacings, delta_min, delta_max),
    )
