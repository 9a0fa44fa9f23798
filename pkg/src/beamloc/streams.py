"""Counter-based random streams keyed by (seed, ..., purpose).

Every stream is an independent Philox-4x64 generator whose key comes from
``SeedSequence([seed, *path])``. Work can therefore run in any order, on any
number of workers, and still see the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# purpose tags; times use their own stream so enabling them leaves counts unchanged
IONS = 0
TIMES = 1


@dataclass(frozen=True)
class RandomStreams:
    """Factory for per-location generators under a fixed key prefix."""

    seed: int
    path: tuple = ()

    def __post_init__(self):
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "path", tuple(int(v) for v in self.path))

    def child(self, *keys: int) -> "RandomStreams":
        return RandomStreams(self.seed, self.path + tuple(int(k) for k in keys))

    def generator(self, *keys: int) -> np.random.Generator:
        ss = np.random.SeedSequence([self.seed, *self.path, *(int(k) for k in keys)])
        return np.random.Generator(np.random.Philox(ss))
