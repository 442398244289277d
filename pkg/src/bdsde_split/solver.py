"""Backward splitting recursion for one (or a batch of) conditioning B paths.

Each step ``i+1 -> i`` runs the two halves of the split:

* predictor (explicit Euler BSDE step)::

      H(x')  = Y^{i+1}(x') + dt f(t_{i+1}, x', Y^{i+1}(x'), Z^{i+1}(x'), B_{t_{i+1}}, B_T)
      Y~^i(x) = E[H(x + dW)]            Z^i(x) = E[H(x + dW) dW] / dt

* corrector (Milstein step in the backward noise), with ``xi = Y~^i(x)``::

      Y^i(x) = xi + dB_i E[g(t_{i+1}, x + dW, xi)] + (dB_i**2 - dt)/2 E[c(t_{i+1}, x + dW, xi)]

  where ``c`` is :meth:`Problem.milstein`.

Level ``i`` lives on a grid that is wider than the output grid by ``i`` times
the quadrature reach.  Probes launched from level ``i`` therefore always land
inside level ``i+1`` and never hit the clamped boundary.  Pass
``extend=False`` to run every level on the output grid instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .brownian import BrownianPath, TimeGrid
from .model import Problem
from .quadrature import QuadratureRule, expect, expect_times_dw
from .spatial import SpaceGrid, ValueLevel, aligned_offsets, apply_aligned, apply_stencil, stencil


class SolverDivergence(ArithmeticError):
    """Non-finite values appeared during the backward sweep."""

    def __init__(self, message, time_index=None, node=None, sample=None):
        super().__init__(message)
        self.time_index = time_index
        self.node = node
        self.sample = sample


@dataclass(frozen=True)
class SolveResult:
    level0: ValueLevel
    levels: Optional[tuple] = None  # levels[i] is time level i, trace mode only


def level_grids(grid: SpaceGrid, rule: QuadratureRule, time_grid: TimeGrid, extend: bool = True):
    """Grids for levels ``0..N``; level 0 is ``grid`` itself."""
    n = time_grid.n_steps
    if not extend:
        return [grid] * (n + 1)
    # one spare node per step keeps the outermost probes on centred cubic stencils
    per_step = math.ceil(math.sqrt(2.0 * time_grid.dt) * rule.reach / grid.spacing - 1e-9) + 1
    return [grid.widened(i * per_step) for i in range(n + 1)]


def _check_finite(arr: np.ndarray, what: str, time_index: int, grid: SpaceGrid, sample_offset: int = 0):
    if np.all(np.isfinite(arr)):
        return
    flat = np.argwhere(~np.isfinite(np.atleast_2d(arr)))[0]
    sample, node = int(flat[0]), int(flat[-1])
    raise SolverDivergence(
        f"{what} is not finite at time level {time_index}, node {node} "
        f"(x={grid.nodes[node]:.6g}), sample {sample + sample_offset}",
        time_index=time_index,
        node=node,
        sample=sample + sample_offset,
    )


def _col(b) -> np.ndarray:
    """Shape per-sample scalars for broadcasting against ``(samples, nodes, probes)``."""
    return np.asarray(b, dtype=float).reshape(-1, 1, 1)


# batched kernels: values carry a leading sample axis

def terminal_values(problem: Problem, grid: SpaceGrid, b_T, exact_z_seed: bool = False):
    x = grid.nodes
    bT = np.asarray(b_T, dtype=float).reshape(-1, 1)
    y = np.broadcast_to(problem.terminal(x, bT), (bT.shape[0], grid.count)).astype(float)
    if exact_z_seed:
        if problem.exact_z is None:
            raise ValueError("exact Z seed requested but the problem has no exact_z")
        z = problem.exact_z(problem.horizon, x, bT, bT)
    else:
        h = grid.spacing
        z = (problem.terminal(x + h, bT) - problem.terminal(x - h, bT)) / (2.0 * h)
    z = np.broadcast_to(z, y.shape).astype(float)
    return y, z


def _interpolate_probes(next_grid, out_grid, rule, dt, *arrays):
    shifts = np.sqrt(2.0 * dt) * rule.nodes
    fast = aligned_offsets(next_grid, out_grid, shifts)
    if fast is not None:
        starts, weights = fast
        return [apply_aligned(a, starts, weights, out_grid.count) for a in arrays]
    left, weights = stencil(next_grid, rule.probes(out_grid.nodes, dt))
    return [apply_stencil(a, left, weights) for a in arrays]


def bsde_update(problem, rule, dt, t_next, next_grid, y_next, z_next, out_grid, b_next, b_T):
    """Predictor on a batch: returns ``(y_tilde, z)`` of shape ``(samples, out_grid.count)``."""
    probes = rule.probes(out_grid.nodes, dt)
    y_p, z_p = _interpolate_probes(next_grid, out_grid, rule, dt, y_next, z_next)
    h = y_p + dt * problem.f(t_next, probes, y_p, z_p, _col(b_next), _col(b_T))
    return expect(h, rule), expect_times_dw(h, rule, dt) / dt


def sde_update(problem, rule, dt, t_next, y_tilde, out_nodes, db, b_next, b_T):
    """Corrector on a batch; ``db`` holds one increment per sample."""
    probes = rule.probes(out_nodes, dt)
    xi = y_tilde[..., None]
    bn, bT = _col(b_next), _col(b_T)
    g_mean = expect(np.broadcast_to(problem.g(t_next, probes, xi, bn, bT), xi.shape[:-1] + probes.shape[-1:]), rule)
    c_mean = expect(np.broadcast_to(problem.milstein(t_next, probes, xi, bn, bT), g_mean.shape + probes.shape[-1:]), rule)
    db = np.asarray(db, dtype=float).reshape(-1, 1)
    return y_tilde + db * g_mean + 0.5 * (db * db - dt) * c_mean


def solve_batch(
    problem: Problem,
    grid: SpaceGrid,
    rule: QuadratureRule,
    time_grid: TimeGrid,
    increments: np.ndarray,
    *,
    trace: bool = False,
    exact_z_seed: bool = False,
    extend: bool = True,
    sample_offset: int = 0,
) -> SolveResult:
    """Run the recursion for a stack of B paths, ``increments`` of shape ``(samples, N)``."""
    increments = np.atleast_2d(np.asarray(increments, dtype=float))
    n = time_grid.n_steps
    if increments.shape[1] != n:
        raise ValueError(f"paths have {increments.shape[1]} increments, time grid has {n} steps")
    if not math.isclose(problem.horizon, time_grid.horizon, rel_tol=1e-12):
        raise ValueError("problem horizon and time grid horizon differ")
    dt = time_grid.dt
    cum = np.concatenate([np.zeros((increments.shape[0], 1)), np.cumsum(increments, axis=1)], axis=1)
    b_T = cum[:, -1]
    grids = level_grids(grid, rule, time_grid, extend)

    y, z = terminal_values(problem, grids[n], b_T, exact_z_seed)
    _check_finite(y, "terminal Y", n, grids[n], sample_offset)
    _check_finite(z, "terminal Z", n, grids[n], sample_offset)
    levels = [ValueLevel(y, y, z, n, grids[n])] if trace else None

    for i in range(n - 1, -1, -1):
        t_next = time_grid.time(i + 1)
        nodes = grids[i].nodes
        y_tilde, z = bsde_update(problem, rule, dt, t_next, grids[i + 1], y, z, grids[i], cum[:, i + 1], b_T)
        _check_finite(y_tilde, "Y~", i, grids[i], sample_offset)
        _check_finite(z, "Z", i, grids[i], sample_offset)
        y = sde_update(problem, rule, dt, t_next, y_tilde, nodes, increments[:, i], cum[:, i + 1], b_T)
        _check_finite(y, "Y", i, grids[i], sample_offset)
        if trace:
            levels.append(ValueLevel(y_tilde, y, z, i, grids[i]))

    level0 = ValueLevel(y_tilde, y, z, 0, grid)
    return SolveResult(level0, tuple(reversed(levels)) if trace else None)


# single-path API

def _single(level: ValueLevel) -> ValueLevel:
    return ValueLevel(level.y_tilde[0], level.y[0], level.z[0], level.time_index, level.grid)


def terminal_level(problem: Problem, grid: SpaceGrid, path: BrownianPath, exact_z_seed: bool = False) -> ValueLevel:
    """Level ``N``: ``Y = Y~ = terminal(x, B_T)``; ``Z`` from a central difference (or ``exact_z``)."""
    y, z = terminal_values(problem, grid, path.b_T, exact_z_seed)
    _check_finite(y, "terminal Y", path.n_steps, grid)
    _check_finite(z, "terminal Z", path.n_steps, grid)
    return ValueLevel(y[0], y[0], z[0], path.n_steps, grid)


def step_bsde(problem, grid, rule, dt, t_next, next: ValueLevel, path: BrownianPath):
    """Predictor from ``next`` (level ``i+1``, on its own grid) onto the nodes of ``grid``."""
    i1 = next.time_index
    y_tilde, z = bsde_update(
        problem, rule, dt, t_next, next.grid, np.atleast_2d(next.y), np.atleast_2d(next.z),
        grid, path.cumulative[i1], path.b_T,
    )
    _check_finite(y_tilde, "Y~", i1 - 1, grid)
    _check_finite(z, "Z", i1 - 1, grid)
    return y_tilde[0], z[0]


def step_sde(problem, grid, rule, dt, t_next, y_tilde, db, path: BrownianPath, time_index: Optional[int] = None):
    """Corrector at the nodes of ``grid``; ``time_index`` is ``i`` (defaults to ``round(t_next/dt) - 1``)."""
    i = round(t_next / dt) - 1 if time_index is None else time_index
    y = sde_update(problem, rule, dt, t_next, np.atleast_2d(y_tilde), grid.nodes, db, path.cumulative[i + 1], path.b_T)
    _check_finite(y, "Y", i, grid)
    return y[0]


def solve_backward(
    problem: Problem,
    grid: SpaceGrid,
    rule: QuadratureRule,
    time_grid: TimeGrid,
    path: BrownianPath,
    *,
    trace: bool = False,
    exact_z_seed: bool = False,
    extend: bool = True,
) -> SolveResult:
    res = solve_batch(problem, grid, rule, time_grid, path.increments[None, :],
                      trace=trace, exact_z_seed=exact_z_seed, extend=extend)
    levels = tuple(_single(lv) for lv in res.levels) if trace else None
    return SolveResult(_single(res.level0), levels)


def solve_bsde(problem, grid, rule, time_grid, path, *, exact_z_seed=False, extend=True) -> ValueLevel:
    """Predictor-only recursion (``Y^i = Y~^i``); ignores ``g``."""
    grids = level_grids(grid, rule, time_grid, extend)
    n, dt = time_grid.n_steps, time_grid.dt
    level = terminal_level(problem, grids[n], path, exact_z_seed)
    for i in range(n - 1, -1, -1):
        y_tilde, z = step_bsde(problem, grids[i], rule, dt, time_grid.time(i + 1), level, path)
        level = ValueLevel(y_tilde, y_tilde, z, i, grids[i])
    return level


def write_trace(result: SolveResult, fh) -> None:
    """Columnar dump: ``time_index node y_tilde y z``, one row per (level, node), levels descending."""
    if result.levels is None:
        raise ValueError("result was produced without trace=True")
    fh.write("# time_index node y_tilde y z\n")
    for level in reversed(result.levels):
        for x, yt, y, z in zip(level.grid.nodes, level.y_tilde, level.y, level.z):
            fh.write(f"{level.time_index} {float(x)!r} {float(yt)!r} {float(y)!r} {float(z)!r}\n")
