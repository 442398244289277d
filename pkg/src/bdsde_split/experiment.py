"""Monte Carlo convergence studies over a ladder of time partitions.

Every level uses the same B trajectories.  Sample ``k`` is drawn once at the
finest partition and coarsened by summing increments.  Per-sample squared
errors are combined with ``math.fsum``, so the RMSE does not depend on how
samples were split across workers.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .brownian import TimeGrid, sample_paths, sample_seed, standard_normals
from .model import Problem
from .quadrature import QuadratureRule, hermite_rule
from .solver import _check_finite, solve_batch, terminal_values
from .spatial import SpaceGrid, apply_stencil, build_grid, default_radius, stencil

METRICS = ("point-at-x0", "grid-l2")
RATE_FLOOR = 1e-10
DEFAULT_Q = 8
DEFAULT_COUNT = 257


class LevelErrors(NamedTuple):
    n: int
    dt: float
    err_y_tilde: float
    err_y: float
    err_z: float


@dataclass
class ConvergenceReport:
    levels: list
    rates: tuple  # (cr_y_tilde, cr_y, cr_z); None where undefined
    samples: int
    seed: int
    metric: str
    problem: str = ""
    settings: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("N,dt,err_ytilde,err_y,err_z\n")
        for lv in self.levels:
            out.write(f"{lv.n},{lv.dt!r},{lv.err_y_tilde!r},{lv.err_y!r},{lv.err_z!r}\n")
        if len(self.levels) > 1:
            out.write("# rates " + " ".join(f"{k}={_fmt_rate(r)}" for k, r in zip(("cr_ytilde", "cr_y", "cr_z"), self.rates)) + "\n")
        return out.getvalue()

    def to_table(self) -> str:
        head = ["Partition", "E|Y~0 - Y0|", "E|Y0 - Y0|", "E|Z0 - Z0|"]
        rows = [[f"N = {lv.n}"] + [f"{e:.4e}" for e in lv[2:]] for lv in self.levels]
        if len(self.levels) > 1:
            rows.append(["CR"] + [("n/a" if r is None else f"{r:.2f}") for r in self.rates])
        widths = [max(len(r[c]) for r in rows + [head]) for c in range(4)]
        line = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
        fmt = lambda r: "| " + " | ".join(v.rjust(w) for v, w in zip(r, widths)) + " |"
        title = f"{self.problem}  samples={self.samples} seed={self.seed} metric={self.metric}"
        return "\n".join([title, line, fmt(head), line] + [fmt(r) for r in rows] + [line]) + "\n"


def _fmt_rate(r):
    return "nan" if r is None else repr(r)


def read_csv(text: str) -> ConvergenceReport:
    """Inverse of :meth:`ConvergenceReport.to_csv` (metadata fields are left blank)."""
    levels, rates = [], (None, None, None)
    lines = text.strip().splitlines()
    if not lines or lines[0] != "N,dt,err_ytilde,err_y,err_z":
        raise ValueError("not a convergence CSV")
    for line in lines[1:]:
        if line.startswith("# rates"):
            vals = dict(kv.split("=") for kv in line[len("# rates"):].split())
            rates = tuple(None if vals[k] == "nan" else float(vals[k]) for k in ("cr_ytilde", "cr_y", "cr_z"))
            continue
        n, dt, a, b, c = line.split(",")
        levels.append(LevelErrors(int(n), float(dt), float(a), float(b), float(c)))
    return ConvergenceReport(levels, rates, samples=0, seed=0, metric="")


def fit_rate(dts: Sequence[float], errors: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log(error) against log(dt).

    Levels with error below ``RATE_FLOOR`` (rounding noise) or non-finite are
    dropped.  Returns None when fewer than two levels remain.
    """
    pts = [(math.log(d), math.log(e)) for d, e in zip(dts, errors) if np.isfinite(e) and e >= RATE_FLOOR]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def default_grid(problem: Problem, rule: QuadratureRule, count: int = DEFAULT_COUNT, radius: Optional[float] = None) -> SpaceGrid:
    r = default_radius(problem.horizon, rule.reach) if radius is None else radius
    return build_grid(problem.x0, r, count)


def _per_sample_sq(problem, level0, grid, b_T, metric):
    """Squared errors of (Y~, Y, Z) at t=0 for each sample, shape ``(samples, 3)``."""
    x = grid.nodes
    bT = b_T.reshape(-1, 1)
    ey = np.broadcast_to(problem.exact_y(0.0, x, 0.0, bT), level0.y.shape)
    ez = np.broadcast_to(problem.exact_z(0.0, x, 0.0, bT), level0.z.shape)
    diffs = [level0.y_tilde - ey, level0.y - ey, level0.z - ez]
    if metric == "point-at-x0":
        c = grid.center_index
        return np.stack([d[:, c] ** 2 for d in diffs], axis=1)
    if metric == "grid-l2":
        mask = grid.middle_half()
        return np.stack([grid.spacing * np.sum(d[:, mask] ** 2, axis=1) for d in diffs], axis=1)
    raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")


def _run_batches(problem, grid, rule, time_grid, increments, metric, batch_size, threads, exact_z_seed):
    total = increments.shape[0]
    starts = list(range(0, total, batch_size))

    def work(s0):
        inc = increments[s0:s0 + batch_size]
        res = solve_batch(problem, grid, rule, time_grid, inc, exact_z_seed=exact_z_seed, sample_offset=s0)
        return _per_sample_sq(problem, res.level0, grid, inc.sum(axis=1), metric)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(s0) for s0 in starts]
    return np.concatenate(parts, axis=0)


def _rmse_from_sq(sq: np.ndarray):
    return tuple(math.sqrt(math.fsum(sq[:, k]) / sq.shape[0]) for k in range(3))


def rmse(
    problem: Problem,
    time_grid: TimeGrid,
    samples: int,
    seed: int,
    metric: str = "point-at-x0",
    *,
    rule: Optional[QuadratureRule] = None,
    grid: Optional[SpaceGrid] = None,
    increments: Optional[np.ndarray] = None,
    batch_size: int = 50,
    threads: int = 1,
    exact_z_seed: bool = False,
):
    """RMSE over ``samples`` B paths of (Y~^0, Y^0, Z^0) against the exact solution at t = 0.

    Sample ``k`` uses the path keyed by ``sample_seed(seed, k)`` unless
    ``increments`` (shape ``(samples, N)``) is given.
    """
    if not problem.has_exact:
        raise ValueError(f"problem {problem.name!r} has no exact solution to compare against")
    if samples < 1:
        raise ValueError("samples must be positive")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    rule = rule or hermite_rule(DEFAULT_Q)
    grid = grid or default_grid(problem, rule)
    if increments is None:
        increments = sample_paths(time_grid, seed, samples)
    sq = _run_batches(problem, grid, rule, time_grid, increments, metric, batch_size, threads, exact_z_seed)
    return _rmse_from_sq(sq)


def convergence_study(
    problem: Problem,
    n_list: Sequence[int],
    samples: int,
    seed: int,
    metric: str = "point-at-x0",
    *,
    rule: Optional[QuadratureRule] = None,
    grid: Optional[SpaceGrid] = None,
    batch_size: int = 50,
    threads: int = 1,
    exact_z_seed: bool = False,
    progress=None,
) -> ConvergenceReport:
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise ValueError("n_list must not be empty")
    if any(b <= a for a, b in zip(n_list, n_list[1:])) or n_list[0] < 1:
        raise ValueError(f"n_list must be positive and strictly increasing, got {n_list}")
    finest = n_list[-1]
    if any(finest % n for n in n_list):
        raise ValueError(f"every partition must divide the finest one ({finest}) for common random numbers")
    rule = rule or hermite_rule(DEFAULT_Q)
    grid = grid or default_grid(problem, rule)

    fine = sample_paths(TimeGrid(finest, problem.horizon), seed, samples)
    levels = []
    for n in n_list:
        tg = TimeGrid(n, problem.horizon)
        coarse = fine.reshape(samples, n, finest // n).sum(axis=2)
        errs = rmse(problem, tg, samples, seed, metric, rule=rule, grid=grid, increments=coarse,
                    batch_size=batch_size, threads=threads, exact_z_seed=exact_z_seed)
        levels.append(LevelErrors(n, tg.dt, *errs))
        if progress:
            progress(levels[-1])
    dts = [lv.dt for lv in levels]
    rates = tuple(fit_rate(dts, [lv[k] for lv in levels]) for k in (2, 3, 4))
    settings = {"q": rule.order, "grid_count": grid.count, "grid_radius": grid.radius}
    return ConvergenceReport(levels, rates, samples, seed, metric, problem.name, settings)


# brute-force oracle

class OracleReport(NamedTuple):
    err_y: float
    err_z: float
    se_y: float
    se_z: float


ORACLE_MAX_STEPS = 8
ORACLE_MAX_COUNT = 33


def oracle_grid(problem: Problem, count: int = ORACLE_MAX_COUNT) -> SpaceGrid:
    """Narrow, fine output grid for kernel comparisons.

    Both pipelines integrate the same piecewise-cubic interpolant.  Quadrature
    only integrates it exactly when it is smooth on the scale of the probes, so
    the comparison uses spacing well below ``sqrt(dt)``.  Level grids still
    widen for the domain of dependence, so nothing near ``X_0`` is clamped.
    """
    return build_grid(problem.x0, 2.0 * math.sqrt(problem.horizon), count)


def _balanced_normals(seed: int, rows: int, per: int) -> np.ndarray:
    """Antithetic N(0, 1) draws rescaled to unit second moment, one row per time step.

    Each row has mean exactly zero and mean square exactly one, so the Monte
    Carlo kernels reproduce affine data exactly, like the quadrature does.
    """
    half = standard_normals(seed, rows * (per // 2)).reshape(rows, per // 2)
    z = np.concatenate([half, -half], axis=1)
    return z / np.sqrt(np.mean(z * z, axis=1, keepdims=True))


def _mc_sweep(problem, grid, time_grid, increments_row, normals):
    """One backward sweep with Monte Carlo kernels; ``normals`` has shape ``(N, draws)``."""
    n, dt = time_grid.n_steps, time_grid.dt
    cum = np.concatenate([[0.0], np.cumsum(increments_row)])
    b_T = cum[-1]
    reach = float(np.max(np.abs(normals))) * math.sqrt(dt)
    per_step = math.ceil(reach / grid.spacing) + 1
    grids = [grid.widened(i * per_step) for i in range(n + 1)]
    y, z = terminal_values(problem, grids[n], b_T)
    y, z = y[0], z[0]
    for i in range(n - 1, -1, -1):
        t_next, b_next = time_grid.time(i + 1), cum[i + 1]
        dw = math.sqrt(dt) * normals[i]
        x = grids[i].nodes
        pts = x[:, None] + dw[None, :]
        left, weights = stencil(grids[i + 1], pts)
        y_p, z_p = apply_stencil(y, left, weights), apply_stencil(z, left, weights)
        h = y_p + dt * problem.f(t_next, pts, y_p, z_p, b_next, b_T)
        y_tilde = h.mean(axis=1)
        z = (h * dw).mean(axis=1) / dt
        xi = y_tilde[:, None]
        g_mean = np.broadcast_to(problem.g(t_next, pts, xi, b_next, b_T), pts.shape).mean(axis=1)
        c_mean = np.broadcast_to(problem.milstein(t_next, pts, xi, b_next, b_T), pts.shape).mean(axis=1)
        db = increments_row[i]
        y = y_tilde + db * g_mean + 0.5 * (db * db - dt) * c_mean
        _check_finite(y, "oracle Y", i, grids[i])
    return y_tilde, y, z


def oracle_rmse(
    problem: Problem,
    time_grid: TimeGrid,
    samples: int,
    seed: int,
    *,
    grid: Optional[SpaceGrid] = None,
    draws: int = 10 ** 5,
    replicates: int = 10,
    kernel_seed: int = 7,
) -> OracleReport:
    """Point-at-x0 RMSE of (Y^0, Z^0) with every conditional expectation done by plain Monte Carlo.

    The ``draws`` forward increments per step are split into ``replicates``
    independent sweeps, each using antithetic, variance-matched draws.  Each
    sample's ``(Y^0, Z^0)`` is averaged over the replicates before the RMSE is
    taken, so kernel noise does not inflate the error.  The standard error is
    the leave-one-replicate-out jackknife.  B paths match :func:`rmse` with the
    same ``seed``.
    """
    if time_grid.n_steps > ORACLE_MAX_STEPS:
        raise ValueError(f"oracle limited to N <= {ORACLE_MAX_STEPS}, got {time_grid.n_steps}")
    if not problem.has_exact:
        raise ValueError("oracle needs an exact solution")
    grid = grid or oracle_grid(problem)
    if grid.count > ORACLE_MAX_COUNT:
        raise ValueError(f"oracle limited to grids of <= {ORACLE_MAX_COUNT} nodes, got {grid.count}")
    if draws % (2 * replicates):
        raise ValueError("draws must split evenly into antithetic pairs per replicate")
    per = draws // replicates
    n = time_grid.n_steps
    increments = sample_paths(time_grid, seed, samples)
    c = grid.center_index
    # (replicate, sample, [Y, Z]) estimates at the launch node X_0
    est = np.empty((replicates, samples, 2))
    exact = np.empty((samples, 2))
    for k in range(samples):
        b_T = increments[k].sum()
        exact[k] = problem.exact_y(0.0, grid.nodes[c], 0.0, b_T), problem.exact_z(0.0, grid.nodes[c], 0.0, b_T)
        for r in range(replicates):
            normals = _balanced_normals(sample_seed(kernel_seed, r * samples + k), n, per)
            _, y, z = _mc_sweep(problem, grid, time_grid, increments[k], normals)
            est[r, k] = y[c], z[c]

    def rmse_of(values):
        return np.array([math.sqrt(math.fsum((values[:, j] - exact[:, j]) ** 2) / samples) for j in range(2)])

    mean = rmse_of(est.mean(axis=0))
    if replicates > 1:
        loo = np.array([rmse_of(np.delete(est, r, axis=0).mean(axis=0)) for r in range(replicates)])
        se = np.sqrt((replicates - 1) / replicates * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    else:
        se = np.full(2, np.inf)
    return OracleReport(float(mean[0]), float(mean[1]), float(se[0]), float(se[1]))
