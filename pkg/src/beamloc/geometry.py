"""Scan-line geometry and the beam/edge mixing weight.

Scan positions sit on the integer grid ``0 .. length-1`` (pixel units). A
Gaussian beam of width ``sigma_b`` centred on position ``g`` lands beyond the
edge at ``gamma`` with probability ``q = 1 - Phi((gamma - g) / sigma_b)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np
from scipy.special import erfc

from .errors import InvalidParameter

#: |z| beyond which q is snapped to exactly 0 or 1.
SNAP_Z = 8.0

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class ScanGeometry:
    """One horizontal scan line with ``length`` positions ``0 .. length-1``."""

    length: int

    def __post_init__(self):
        if int(self.length) != self.length or self.length < 2:
            raise InvalidParameter(f"scan length must be an integer >= 2, got {self.length!r}")
        object.__setattr__(self, "length", int(self.length))

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.length, dtype=float)


def mixing_weights(gamma, g1, sigma_b):
    """Return ``(1 - q, q)`` for an edge at `gamma` seen from scan position `g1`.

    Both weights come from the complementary error function so each stays
    accurate in its own tail. Beyond ``|z| > SNAP_Z`` they snap to exactly
    0 and 1. Broadcasts over array inputs.
    """
    if np.any(np.asarray(sigma_b) <= 0):
        raise InvalidParameter("sigma_b must be > 0")
    z = (np.asarray(gamma, dtype=float) - np.asarray(g1, dtype=float)) / sigma_b
    w1 = 0.5 * erfc(-z * _INV_SQRT2)
    w2 = 0.5 * erfc(z * _INV_SQRT2)
    w1 = np.where(z > SNAP_Z, 1.0, np.where(z < -SNAP_Z, 0.0, w1))
    w2 = np.where(z > SNAP_Z, 0.0, np.where(z < -SNAP_Z, 1.0, w2))
    if w1.ndim == 0:
        return float(w1), float(w2)
    return w1, w2


def mixing_q(gamma, g1, sigma_b):
    """Probability that an ion aimed at `g1` lands right of the edge at `gamma`."""
    return mixing_weights(gamma, g1, sigma_b)[1]


def grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive arithmetic grid ``start, start + step, ... <= stop``."""
    if not step > 0:
        raise InvalidParameter("grid step must be > 0")
    if stop < start:
        return np.zeros(0)
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12)
