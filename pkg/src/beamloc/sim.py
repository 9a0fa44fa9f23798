"""Generative model of a time-resolved line scan across a two-valued edge.

At each scan position ``k`` a Poisson(lambda) number of ions arrives. Each
ion lands at ``s1 = k + W`` with ``W ~ N(0, sigma_b^2)``, emits
``Poisson(eta1)`` SEs if ``s1 <= gamma`` and ``Poisson(eta2)`` otherwise, and
is seen only when it emits at least one SE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter
from .geometry import ScanGeometry, mixing_q
from .streams import IONS, TIMES, RandomStreams

__all__ = [
    "EdgeSample",
    "BeamConfig",
    "TRMScan",
    "ConventionalScan",
    "Realization",
    "mixing_q",
    "realize",
    "simulate_trm",
    "simulate_conventional",
]


@dataclass(frozen=True)
class EdgeSample:
    """Yield ``eta1`` at ``s <= gamma`` and ``eta2`` beyond it."""

    eta1: float
    eta2: float
    gamma: float

    def __post_init__(self):
        for name in ("eta1", "eta2", "gamma"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidParameter(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.eta1 < 0 or self.eta2 < 0:
            raise InvalidParameter(f"SE yields must be >= 0, got ({self.eta1}, {self.eta2})")


@dataclass(frozen=True)
class BeamConfig:
    sigma_b: float
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "sigma_b", float(self.sigma_b))
        object.__setattr__(self, "lam", float(self.lam))
        if not (self.sigma_b > 0 and math.isfinite(self.sigma_b)):
            raise InvalidParameter(f"sigma_b must be > 0, got {self.sigma_b}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InvalidParameter(f"lambda must be > 0, got {self.lam}")


def _as_int_array(v):
    a = np.asarray(v, dtype=np.int64).ravel()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TRMScan:
    """Observed ions per location: positive SE counts and optional detection times."""

    counts: tuple
    times: tuple | None = None

    def __post_init__(self):
        counts = tuple(_as_int_array(c) for c in self.counts)
        for k, c in enumerate(counts):
            if c.size and c.min() < 1:
                raise InvalidParameter(f"location {k}: stored SE counts must be >= 1")
        object.__setattr__(self, "counts", counts)
        if self.times is not None:
            times = tuple(np.asarray(t, dtype=float).ravel() for t in self.times)
            if len(times) != len(counts):
                raise InvalidParameter("times must have one entry per location")
            for k, (t, c) in enumerate(zip(times, counts)):
                if t.size != c.size:
                    raise InvalidParameter(f"location {k}: one time per observed ion required")
                if t.size and (t[0] < 0 or t[-1] >= 1 or np.any(np.diff(t) < 0)):
                    raise InvalidParameter(f"location {k}: times must be sorted within [0, 1)")
                t.setflags(write=False)
            object.__setattr__(self, "times", times)

    @property
    def length(self) -> int:
        return len(self.counts)

    @property
    def mtilde(self) -> np.ndarray:
        return np.array([c.size for c in self.counts], dtype=np.int64)

    @property
    def ysum(self) -> np.ndarray:
        return np.array([int(c.sum()) for c in self.counts], dtype=np.int64)

    def compressed(self):
        """Distinct counts per location as ``(offsets, values, multiplicities)``."""
        offsets = [0]
        vals, mult = [], []
        for c in self.counts:
            u, n = np.unique(c, return_counts=True)
            vals.append(u)
            mult.append(n)
            offsets.append(offsets[-1] + u.size)
        return (
            np.asarray(offsets, dtype=np.int64),
            np.concatenate(vals).astype(np.int64) if vals else np.zeros(0, np.int64),
            np.concatenate(mult).astype(float) if mult else np.zeros(0),
        )

    def reflected(self) -> "TRMScan":
        """The same data with location ``k`` moved to ``length - 1 - k``."""
        times = None if self.times is None else self.times[::-1]
        return TRMScan(self.counts[::-1], times)

    def __eq__(self, other):
        if not isinstance(other, TRMScan):
            return NotImplemented
        if self.length != other.length or (self.times is None) != (other.times is None):
            return False
        same = all(np.array_equal(a, b) for a, b in zip(self.counts, other.counts))
        if self.times is not None:
            same = same and all(np.array_equal(a, b) for a, b in zip(self.times, other.times))
        return same


@dataclass(frozen=True, eq=False)
class ConventionalScan:
    """Total SE count per location."""

    y: np.ndarray

    def __post_init__(self):
        y = _as_int_array(self.y)
        if y.size and y.min() < 0:
            raise InvalidParameter("SE totals must be >= 0")
        object.__setattr__(self, "y", y)

    @property
    def length(self) -> int:
        return self.y.size

    def reflected(self) -> "ConventionalScan":
        return ConventionalScan(self.y[::-1])

    def __eq__(self, other):
        if not isinstance(other, ConventionalScan):
            return NotImplemented
        return np.array_equal(self.y, other.y)


@dataclass(frozen=True, eq=False)
class Realization:
    """Everything the instrument produced, including what it cannot see.

    ``n_ions[k]`` is the true ion count M, ``se[k]`` the SE count of every
    ion (zeros included) and ``arrival[k]`` the sorted arrival times.
    """

    n_ions: np.ndarray
    se: tuple
    arrival: tuple | None = field(default=None)

    def trm(self) -> TRMScan:
        counts = tuple(x[x > 0] for x in self.se)
        times = None
        if self.arrival is not None:
            times = tuple(t[x > 0] for t, x in zip(self.arrival, self.se))
        return TRMScan(counts, times)

    def conventional(self) -> ConventionalScan:
        return ConventionalScan(np.array([int(x.sum()) for x in self.se], dtype=np.int64))


def _streams(rng) -> RandomStreams:
    if isinstance(rng, RandomStreams):
        return rng
    if isinstance(rng, np.random.Generator):
        return RandomStreams(int(rng.integers(0, 2**63)))
    if isinstance(rng, (int, np.integer)):
        return RandomStreams(int(rng))
    raise TypeError("rng must be a RandomStreams, a numpy Generator or an integer seed")


def realize(sample: EdgeSample, beam: BeamConfig, geom: ScanGeometry, rng, times: bool = False) -> Realization:
    """Run the full ion/SE pipeline once; each location owns its random stream."""
    streams = _streams(rng)
    n_ions = np.empty(geom.length, dtype=np.int64)
    se, arrival = [], []
    for k in range(geom.length):
        g = streams.generator(k, IONS)
        m = int(g.poisson(beam.lam))
        s1 = k + beam.sigma_b * g.standard_normal(m)
        # s1 == gamma belongs to side 1
        eta = np.where(s1 > sample.gamma, sample.eta2, sample.eta1)
        n_ions[k] = m
        se.append(g.poisson(eta).astype(np.int64))
        if times:
            arrival.append(np.sort(streams.generator(k, TIMES).random(m)))
    return Realization(n_ions, tuple(se), tuple(arrival) if times else None)


def simulate_trm(sample: EdgeSample, beam: BeamConfig, geom: ScanGeometry, rng, times: bool = False) -> TRMScan:
    """Simulate the time-resolved data of one scan line."""
    return realize(sample, beam, geom, rng, times).trm()


def simulate_conventional(sample: EdgeSample, beam: BeamConfig, geom: ScanGeometry, rng) -> ConventionalScan:
    """Simulate the per-location SE totals; same stream layout as `simulate_trm`."""
    return realize(sample, beam, geom, rng).conventional()
