"""Reproducible samples of the backward-driving Brownian motion B.

Draws come from numpy's counter-based Philox generator, keyed per sample by
``sample_seed(base_seed, k)``.  That key is the SplitMix64 finaliser applied to
``base_seed * 0x9E3779B97F4A7C15 + k`` (mod 2**64).  Gaussians are produced by
inverse CDF (``scipy.special.ndtri``) from 53-bit uniforms strictly inside
(0, 1), so the stream for sample ``k`` never depends on which other samples
run or in what order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class TimeGrid:
    n_steps: int
    horizon: float = 1.0

    def __post_init__(self):
        if isinstance(self.n_steps, bool) or int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def time(self, i: int) -> float:
        return i * self.dt if i < self.n_steps else self.horizon


@dataclass(frozen=True)
class BrownianPath:
    increments: np.ndarray
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        inc = np.array(self.increments, dtype=float)
        cum = np.concatenate(([0.0], np.cumsum(inc)))
        inc.setflags(write=False)
        cum.setflags(write=False)
        object.__setattr__(self, "increments", inc)
        object.__setattr__(self, "cumulative", cum)

    @property
    def n_steps(self) -> int:
        return len(self.increments)

    @property
    def b_T(self) -> float:
        return float(self.cumulative[-1])

    def coarsen(self, factor: int) -> "BrownianPath":
        """Sum consecutive blocks of ``factor`` increments."""
        if self.n_steps % factor:
            raise ValueError(f"cannot coarsen {self.n_steps} steps by a factor of {factor}")
        return BrownianPath(self.increments.reshape(-1, factor).sum(axis=1))


def splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def sample_seed(base_seed: int, k: int) -> int:
    """64-bit key for Monte Carlo sample ``k``."""
    if base_seed < 0 or k < 0:
        raise ValueError("seeds and sample indices must be non-negative")
    return splitmix64((base_seed * _GOLDEN + k) & _MASK64)


def standard_normals(seed: int, n: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=seed & _MASK64))
    bits = gen.integers(0, 1 << 53, size=n, dtype=np.uint64)
    u = (bits.astype(float) + 0.5) / float(1 << 53)
    return ndtri(u)


def sample_path(grid: TimeGrid, seed: int) -> BrownianPath:
    """``grid.n_steps`` independent N(0, dt) increments keyed by ``seed``."""
    return BrownianPath(np.sqrt(grid.dt) * standard_normals(seed, grid.n_steps))


def sample_paths(grid: TimeGrid, base_seed: int, samples: int, start: int = 0) -> np.ndarray:
    """Stacked increments, shape ``(samples, n_steps)``; row ``r`` is sample ``start + r``."""
    rows = [sample_path(grid, sample_seed(base_seed, start + r)).increments for r in range(samples)]
    return np.array(rows).reshape(samples, grid.n_steps)
