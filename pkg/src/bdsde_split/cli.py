"""Command-line front end.

    bdsde-split --problem example1                      # default ladder, aligned table
    bdsde-split --problem example3 --n 8 --format csv
    bdsde-split --problem run.cfg --out report.csv      # flat key = value file

Config files hold one ``key = value`` per line using the long flag names
(``n``, ``samples``, ``seed``, ``gh-order``, ``grid-count``, ``grid-radius``,
``metric``, ``format``, ``threads``).  The ``problem`` key names a built-in
family, optionally with ``horizon``, ``x0`` and ``printed``.  Command-line
flags override file values.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

from .brownian import TimeGrid, sample_path, sample_seed
from .experiment import DEFAULT_COUNT, DEFAULT_Q, METRICS, convergence_study, default_grid
from .model import BUILTINS, get_problem
from .quadrature import MAX_ORDER, hermite_rule
from .solver import SolverDivergence, solve_backward, write_trace


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "example1"
    n_list: list = field(default_factory=lambda: [8, 16, 32, 64, 128])
    samples: int = 300
    seed: int = 42
    gh_order: int = DEFAULT_Q
    grid_count: int = DEFAULT_COUNT
    grid_radius: Optional[float] = None
    metric: str = "point-at-x0"
    out: Optional[str] = None
    format: str = "table"
    threads: int = 1
    trace: Optional[str] = None
    horizon: float = 1.0
    x0: float = 0.0
    printed: bool = False

    def validate(self):
        base = self.problem[: -len("-printed")] if self.problem.endswith("-printed") else self.problem
        if base not in BUILTINS:
            raise UsageError(f"unknown problem {self.problem!r}; choose from {sorted(BUILTINS)}")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise UsageError("--n needs positive integers")
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise UsageError("--n must be strictly increasing")
        if any(self.n_list[-1] % n for n in self.n_list):
            raise UsageError("every --n value must divide the largest one")
        if self.samples < 1:
            raise UsageError("--samples must be positive")
        if self.seed < 0:
            raise UsageError("--seed must be non-negative")
        if not 1 <= self.gh_order <= MAX_ORDER:
            raise UsageError(f"--gh-order must lie in [1, {MAX_ORDER}]")
        if self.grid_count < 5 or self.grid_count % 2 == 0:
            raise UsageError("--grid-count must be an odd integer >= 5")
        if self.grid_radius is not None and not self.grid_radius > 0:
            raise UsageError("--grid-radius must be positive")
        if self.metric not in METRICS:
            raise UsageError(f"--metric must be one of {METRICS}")
        if self.format not in ("csv", "table"):
            raise UsageError("--format must be csv or table")
        if self.threads < 1:
            raise UsageError("--threads must be positive")
        if not self.horizon > 0:
            raise UsageError("horizon must be positive")


_KEYS = {
    "problem": str, "n": lambda v: [int(s) for s in v.split(",") if s.strip()], "samples": int,
    "seed": int, "gh-order": int, "grid-count": int, "grid-radius": float, "metric": str,
    "format": str, "threads": int, "horizon": float, "x0": float,
    "printed": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
}


def read_config(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in _KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _KEYS[key](val)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {val!r}") from None
    return values


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdsde-split", description="Splitting-up scheme convergence studies for BDSDEs.")
    p.add_argument("--problem", help="built-in name (example1..3, optional -printed suffix) or config file path")
    p.add_argument("--n", help="comma-separated partition counts (default 8,16,32,64,128)")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--gh-order", type=int)
    p.add_argument("--grid-count", type=int)
    p.add_argument("--grid-radius", type=float)
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "table"))
    p.add_argument("--threads", type=int)
    p.add_argument("--trace", help="dump every level of sample 0 at the finest partition to this file")
    p.add_argument("-q", "--quiet", action="store_true", help="no progress on stderr")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    merged = {}
    if args.problem and os.path.isfile(args.problem):
        merged.update(read_config(args.problem))
    elif args.problem:
        merged["problem"] = args.problem
    for key in ("n", "samples", "seed", "gh_order", "grid_count", "grid_radius", "metric", "format", "threads"):
        val = getattr(args, key)
        if val is not None:
            merged[key.replace("_", "-")] = _KEYS[key.replace("_", "-")](val) if key == "n" else val
    for key, val in merged.items():
        setattr(cfg, {"n": "n_list"}.get(key, key.replace("-", "_")), val)
    cfg.out, cfg.trace = args.out, args.trace
    if cfg.printed and not cfg.problem.endswith("-printed"):
        cfg.problem += "-printed"
    cfg.validate()
    return cfg


def run(cfg: RunConfig, log=None) -> int:
    problem = get_problem(cfg.problem, horizon=cfg.horizon, x0=cfg.x0)
    rule = hermite_rule(cfg.gh_order)
    grid = default_grid(problem, rule, cfg.grid_count, cfg.grid_radius)
    start = time.time()

    def progress(lv):
        if log:
            log.write(f"N={lv.n:<5d} err_ytilde={lv.err_y_tilde:.4e} err_y={lv.err_y:.4e} "
                      f"err_z={lv.err_z:.4e}  [{time.time() - start:.1f}s]\n")
            log.flush()

    report = convergence_study(problem, cfg.n_list, cfg.samples, cfg.seed, cfg.metric,
                               rule=rule, grid=grid, threads=cfg.threads, progress=progress)
    text = report.to_csv() if cfg.format == "csv" else report.to_table()
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

    if cfg.trace:
        tg = TimeGrid(cfg.n_list[-1], problem.horizon)
        res = solve_backward(problem, grid, rule, tg, sample_path(tg, sample_seed(cfg.seed, 0)), trace=True)
        with open(cfg.trace, "w") as fh:
            write_trace(res, fh)
    return 0


def _check_writable(path: Optional[str]):
    if path is None:
        return
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory) or not os.access(directory, os.W_OK) or (
        os.path.exists(path) and not os.access(path, os.W_OK)
    ):
        raise UsageError(f"cannot write to {path}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        _check_writable(cfg.out)
        _check_writable(cfg.trace)
    except (UsageError, OSError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"bdsde-split: error: {exc}\n")
        return 2
    try:
        return run(cfg, log=None if args.quiet else sys.stderr)
    except SolverDivergence as exc:
        sys.stderr.write(f"bdsde-split: solver diverged: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
