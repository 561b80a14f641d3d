"""Synthesized and desired beampatterns, plus desired-pattern presets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array import ArrayGeometry, cumulative_delays

FAMILIES = ("max-DF", "cardioid", "dipole-like", "omnidirectional")


class DimensionError(ValueError):
    """Weight vector length does not match the number of microphones."""


@dataclass(frozen=True)
class FilterWeights:
    """Complex filter ``[H_1 ... H_M]`` applied at a single frequency."""

    weights: np.ndarray
    frequency: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=complex).ravel()
        if not np.all(np.isfinite(w)):
            raise ValueError("filter weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size


@dataclass(frozen=True)
class DesiredPattern:
    """Target pattern ``sum_n a_n cos^n(theta - steer_angle)``."""

    order: int
    steer_angle: float
    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(a) for a in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if int(self.order) != self.order or self.order < 0:
            raise ValueError(f"order must be a non-negative integer, got {self.order}")
        if len(coeffs) != self.order + 1:
            raise ValueError(
                f"order {self.order} needs {self.order + 1} coefficients, got {len(coeffs)}"
            )
        if abs(math.fsum(coeffs) - 1.0) > 1e-12:
            raise ValueError(f"coefficients must sum to 1, got sum {math.fsum(coeffs)!r}")

    @classmethod
    def from_preset(cls, order: int, family: str = "max-DF", steer_angle: float = 0.0):
        return cls(order, steer_angle, tuple(preset_coefficients(order, family)))


@dataclass(frozen=True)
class PolarGrid:
    """``size`` uniformly spaced azimuths ``2 pi k / size`` on ``[0, 2 pi)``.

    A rectangle rule on this grid integrates trigonometric polynomials of
    degree below ``size`` exactly, which is what the polar integrals rely on.
    """

    size: int = 360

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 8:
            raise ValueError(f"grid size must be an integer >= 8, got {self.size}")

    @property
    def step(self) -> float:
        return 2.0 * math.pi / self.size

    @property
    def angles(self) -> np.ndarray:
        return 2.0 * math.pi * np.arange(self.size) / self.size


def _weights(h) -> np.ndarray:
    return np.asarray(getattr(h, "weights", h), dtype=complex).ravel()


def _check_dims(geometry, h):
    if h.size != geometry.num_mics:
        raise DimensionError(
            f"{h.size} filter weights given for an array of {geometry.num_mics} microphones"
        )


def _pattern(delays, h, omega, cos_theta):
    # B = d^H h, i.e. sum_m H_m exp(+j omega D_m cos theta)
    phase = omega * np.multiply.outer(cos_theta, delays)
    return np.exp(1j * phase) @ h


def synthesized_pattern(geometry: ArrayGeometry, h, omega: float, theta: float) -> complex:
    """Array response ``d(omega, theta)^H h`` at a single angle."""
    h = _weights(h)
    _check_dims(geometry, h)
    return complex(_pattern(cumulative_delays(geometry), h, omega, math.cos(theta)))


def pattern_on_grid(geometry: ArrayGeometry, h, omega: float, grid: PolarGrid) -> np.ndarray:
    """Vectorized :func:`synthesized_pattern` over every angle of ``grid``."""
    h = _weights(h)
    _check_dims(geometry, h)
    return _pattern(cumulative_delays(geometry), h, omega, np.cos(grid.angles))


def desired_pattern(p: DesiredPattern, theta):
    """Evaluate the target pattern; accepts a scalar or an array of angles."""
    x = np.cos(np.asarray(theta, dtype=float) - p.steer_angle)
    value = np.polynomial.polynomial.polyval(x, p.coefficients)
    return float(value) if np.ndim(value) == 0 else value


def desired_on_grid(p: DesiredPattern, grid: PolarGrid) -> np.ndarray:
    return desired_pattern(p, grid.angles)


def cosine_moment(power: int) -> float:
    """Angular mean of ``cos(theta)**power`` over a full turn."""
    if power % 2:
        return 0.0
    return math.comb(power, power // 2) / 2.0**power


def cosine_gram(order: int) -> np.ndarray:
    """Matrix of angular means of ``cos^(m+n)``.

    ``a @ Q @ a`` is the mean power of the desired pattern with coefficients
    ``a``, so ``1 / (a @ Q @ a)`` is its directivity factor when ``sum(a) == 1``.
    """
    idx = np.arange(order + 1)
    return np.vectorize(cosine_moment)(idx[:, None] + idx[None, :]).astype(float)


def _max_df(order):
    # minimize a^T Q a subject to 1^T a = 1 through the KKT system
    q = cosine_gram(order)
    n = order + 1
    kkt = np.zeros((n + 1, n + 1))
    kkt[:n, :n] = 2.0 * q
    kkt[:n, n] = 1.0
    kkt[n, :n] = 1.0
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    return np.linalg.solve(kkt, rhs)[:n]


def preset_coefficients(order: int, family: str = "max-DF") -> np.ndarray:
    """Coefficients ``a_0 ... a_N`` of a canonical differential pattern.

    Parameters
    ----------
    order : int
        Pattern order ``N``.
    family : {"max-DF", "cardioid", "dipole-like", "omnidirectional"}
        ``max-DF`` maximizes the directivity factor over all order-``N``
        patterns with unit look-direction response and is defined for any
        order. ``cardioid`` is ``((1 + cos)/2)**N`` and ``dipole-like`` is
        ``cos**N``; both need ``N`` in 1..3. ``omnidirectional`` is the
        order-0 pattern.

    Returns
    -------
    ndarray, shape (N + 1,)
    """
    if int(order) != order or order < 0:
        raise ValueError(f"order must be a non-negative integer, got {order}")
    order = int(order)
    if family == "max-DF":
        return _max_df(order)
    if family == "omnidirectional":
        if order != 0:
            raise ValueError("the omnidirectional preset only exists for order 0")
        return np.array([1.0])
    if family not in FAMILIES:
        raise ValueError(f"unknown preset family {family!r}; choose from {FAMILIES}")
    if order not in (1, 2, 3):
        raise ValueError(f"preset {family!r} is defined for orders 1-3, got {order}")
    if family == "cardioid":
        return np.array([math.comb(order, n) for n in range(order + 1)], dtype=float) / 2.0**order
    a = np.zeros(order + 1)
    a[order] = 1.0
    return a


def presets_for_order(order: int) -> list[str]:
    """Preset family names that are defined for ``order``."""
    if order == 0:
        return ["omnidirectional", "max-DF"]
    if order in (1, 2, 3):
        return ["max-DF", "cardioid", "dipole-like"]
    return ["max-DF"]
