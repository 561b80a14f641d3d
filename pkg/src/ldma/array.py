"""Far-field model of a non-uniform linear microphone array.

Geometry is held as the gaps between neighbouring microphones. Absolute
positions and delays are derived from those gaps when needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SOUND_SPEED = 340.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Inter-microphone spacings (metres) of an ``M``-element line array.

    ``spacings[m]`` is the gap between microphone ``m`` and ``m + 1``, so a
    geometry with ``M`` microphones carries ``M - 1`` spacings.
    """

    spacings: tuple[float, ...] = ()
    sound_speed: float = SOUND_SPEED

    def __post_init__(self):
        spacings = tuple(float(s) for s in np.ravel(np.asarray(self.spacings, dtype=float)))
        object.__setattr__(self, "spacings", spacings)
        if not all(math.isfinite(s) for s in spacings):
            raise ValueError(f"spacings must be finite, got {spacings}")
        if any(s < 0 for s in spacings):
            raise ValueError(f"spacings must be non-negative, got {spacings}")
        if not (math.isfinite(self.sound_speed) and self.sound_speed > 0):
            raise ValueError(f"sound speed must be positive, got {self.sound_speed}")

    @property
    def num_mics(self) -> int:
        return len(self.spacings) + 1

    @property
    def delays(self) -> np.ndarray:
        """Per-gap propagation delays ``spacing / c`` in seconds."""
        return np.asarray(self.spacings, dtype=float) / self.sound_speed

    @property
    def positions(self) -> np.ndarray:
        """Microphone coordinates along the array axis, first one at 0."""
        return np.concatenate(([0.0], np.cumsum(self.spacings)))


@dataclass(frozen=True)
class Wave:
    """A far-field plane wave; the angular frequency is always derived."""

    frequency: float
    incidence_angle: float = 0.0
    angular_frequency: float = field(init=False)

    def __post_init__(self):
        if not self.frequency >= 0:
            raise ValueError(f"frequency must be >= 0, got {self.frequency}")
        object.__setattr__(self, "angular_frequency", 2.0 * math.pi * self.frequency)


def _cumulative(spacings, sound_speed):
    spacings = np.asarray(spacings, dtype=float)
    out = np.zeros(spacings.size + 1)
    np.cumsum(spacings / sound_speed, out=out[1:])
    return out


def cumulative_delays(geometry: ArrayGeometry) -> np.ndarray:
    """Delay of every microphone relative to the first one.

    Returns ``[0, tau_1, tau_1 + tau_2, ...]`` with one entry per microphone.
    """
    return _cumulative(geometry.spacings, geometry.sound_speed)


def steering_vector(geometry: ArrayGeometry, omega: float, theta: float) -> np.ndarray:
    """Plane-wave steering vector ``exp(-j omega D_m cos(theta))``.

    Parameters
    ----------
    geometry : ArrayGeometry
    omega : float
        Angular frequency in rad/s.
    theta : float
        Incidence angle in radians, measured from the array axis.

    Returns
    -------
    ndarray of complex, shape (M,)
        First element is exactly ``1 + 0j``.
    """
    phase = omega * cumulative_delays(geometry) * math.cos(theta)
    d = np.exp(-1j * phase)
    d[0] = 1.0 + 0.0j
    return d
