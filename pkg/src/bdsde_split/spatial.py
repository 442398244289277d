"""Uniform 1-D grids carrying the time-level value functions, and cubic interpolation on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SpaceGrid:
    center: float
    radius: float
    count: int
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = self.center + self.spacing * (np.arange(self.count) - (self.count - 1) // 2)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def spacing(self) -> float:
        return 2.0 * self.radius / (self.count - 1)

    @property
    def center_index(self) -> int:
        return (self.count - 1) // 2

    def middle_half(self) -> np.ndarray:
        """Boolean mask of nodes within ``radius / 2`` of the center."""
        return np.abs(self.nodes - self.center) <= 0.5 * self.radius + 1e-12 * self.radius

    def widened(self, extra: int) -> "SpaceGrid":
        """Same spacing and center, ``extra`` more nodes on each side."""
        if extra == 0:
            return self
        return SpaceGrid(self.center, self.radius + extra * self.spacing, self.count + 2 * extra)


def build_grid(center: float, radius: float, count: int) -> SpaceGrid:
    if not radius > 0 or not np.isfinite(radius):
        raise ValueError(f"grid radius must be positive and finite, got {radius}")
    if int(count) != count or count < 5 or count % 2 == 0:
        raise ValueError(f"grid count must be an odd integer >= 5, got {count}")
    return SpaceGrid(float(center), float(radius), int(count))


def default_radius(horizon: float, reach: float) -> float:
    """``5 sqrt(T) + sqrt(2T) max|a_j|`` around the initial state."""
    return 5.0 * np.sqrt(horizon) + np.sqrt(2.0 * horizon) * reach


@dataclass(frozen=True)
class ValueLevel:
    """Grid samples of (Y~^i, Y^i, Z^i) at time index ``i``.

    Arrays carry the grid along their last axis; a leading axis, when present,
    indexes Monte Carlo samples.
    """

    y_tilde: np.ndarray
    y: np.ndarray
    z: np.ndarray
    time_index: int
    grid: SpaceGrid

    def __post_init__(self):
        for name in ("y_tilde", "y", "z"):
            arr = getattr(self, name)
            if arr.shape[-1] != self.grid.count:
                raise ValueError(f"{name} has {arr.shape[-1]} entries, grid has {self.grid.count}")
            if not np.all(np.isfinite(arr)):
                raise ArithmeticError(f"{name} at level {self.time_index} holds non-finite values")


def stencil(grid: SpaceGrid, x):
    """Left stencil index and the four cubic Lagrange weights for points ``x``.

    Points outside the grid are clamped to the nearest boundary node, which
    gives constant extrapolation.  Interior points use the four nodes around
    them; the stencil is shifted inward at the first and last interval.
    """
    s = (np.asarray(x, dtype=float) - grid.nodes[0]) / grid.spacing
    s = np.clip(s, 0.0, grid.count - 1.0)
    # nodes reproduce their own value exactly despite rounding in the division
    nearest = np.rint(s)
    s = np.where(np.abs(s - nearest) < 1e-10, nearest, s)
    left = np.clip(np.floor(s).astype(np.intp) - 1, 0, grid.count - 4)
    r = s - left
    # r lies in [0, 3]; nodes sit at r = 0, 1, 2, 3
    rm1, rm2, rm3 = r - 1.0, r - 2.0, r - 3.0
    weights = (
        -rm1 * rm2 * rm3 / 6.0,
        r * rm2 * rm3 / 2.0,
        -r * rm1 * rm3 / 2.0,
        r * rm1 * rm2 / 6.0,
    )
    return left, weights


def apply_stencil(values: np.ndarray, left: np.ndarray, weights) -> np.ndarray:
    """Evaluate an interpolant; ``values`` may carry leading batch axes."""
    w0, w1, w2, w3 = weights
    return (
        w0 * values[..., left]
        + w1 * values[..., left + 1]
        + w2 * values[..., left + 2]
        + w3 * values[..., left + 3]
    )


def aligned_offsets(grid: SpaceGrid, inner: SpaceGrid, shifts):
    """Shift-invariant stencils for probes ``inner.nodes[:, None] + shifts``.

    When ``inner`` is ``grid`` trimmed symmetrically (same spacing, same
    center) and every probe lands inside ``grid``, each probe column ``k``
    uses the same fractional offset for every launch node.  Returns
    ``(starts, weights)`` with ``starts[k]`` the first stencil index for
    launch node 0 and ``weights[k]`` the four Lagrange weights, or ``None``
    when the fast form does not apply.
    """
    trim = grid.count - inner.count
    if trim < 0 or trim % 2 or not np.isclose(grid.spacing, inner.spacing, rtol=1e-12, atol=0.0):
        return None
    if not np.isclose(grid.center, inner.center, rtol=0.0, atol=1e-12 * grid.spacing):
        return None
    left, weights = stencil(grid, np.asarray(shifts, dtype=float) + inner.nodes[0])
    s = np.asarray(shifts, dtype=float) / grid.spacing
    lo, hi = s.min() + trim // 2, s.max() + trim // 2 + inner.count - 1
    if lo < 1.0 or hi > grid.count - 2.0:
        return None
    return left, np.stack(weights)


def apply_aligned(values: np.ndarray, starts: np.ndarray, weights: np.ndarray, count: int) -> np.ndarray:
    """Evaluate at ``count`` launch nodes for every probe column; result ``(..., count, q)``."""
    out = np.empty(values.shape[:-1] + (count, len(starts)))
    for k, start in enumerate(starts):
        w = weights[:, k]
        out[..., k] = (
            w[0] * values[..., start:start + count]
            + w[1] * values[..., start + 1:start + 1 + count]
            + w[2] * values[..., start + 2:start + 2 + count]
            + w[3] * values[..., start + 3:start + 3 + count]
        )
    return out


def interpolate(values, grid: SpaceGrid, x):
    """Piecewise cubic Lagrange interpolation of grid samples at ``x`` (scalar or array)."""
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.count:
        raise ValueError(f"expected {grid.count} values, got {values.shape[-1]}")
    left, weights = stencil(grid, x)
    out = apply_stencil(values, left, weights)
    return float(out) if np.ndim(out) == 0 else out
