"""Count diverging sample paths per level and report errors over the survivors.

    python3 scripts/stability_census.py [--problem example2] [--variant corrected|printed|no-levy]

``no-levy`` drops the derivative-in-b part of the second-order noise term.
Paths that stay finite but exceed an error of 1e3 are counted as blown up.
Samples run in blocks; a block that diverges is retried path by path, so
divergent paths are identified individually.
"""
import argparse
import dataclasses

import numpy as np

from bdsde_split.brownian import TimeGrid, sample_paths
from bdsde_split.experiment import default_grid, fit_rate
from bdsde_split.model import get_problem
from bdsde_split.quadrature import hermite_rule
from bdsde_split.solver import SolverDivergence, solve_batch

BLOCK = 50
BLOWN_UP = 1e3


def survivors(problem, grid, rule, tg, inc):
    """Yield ``(sample, level0, row)`` for each path that stays finite; collect the rest."""
    bad = []
    found = []
    for start in range(0, len(inc), BLOCK):
        block = range(start, min(start + BLOCK, len(inc)))
        try:
            res = solve_batch(problem, grid, rule, tg, inc[block.start:block.stop])
            found += [(k, res.level0, i) for i, k in enumerate(block)]
        except SolverDivergence:
            for k in block:
                try:
                    found.append((k, solve_batch(problem, grid, rule, tg, inc[k:k + 1]).level0, 0))
                except SolverDivergence:
                    bad.append(k)
    return found, bad


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problem", default="example2")
    ap.add_argument("--variant", default="corrected", choices=["corrected", "printed", "no-levy"])
    ap.add_argument("--samples", type=int, default=300)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    name = args.problem + ("-printed" if args.variant == "printed" else "")
    problem = get_problem(name)
    if args.variant == "no-levy":
        problem = dataclasses.replace(problem, g_b=None)
    rule = hermite_rule(8)
    grid = default_grid(problem, rule)
    c = grid.center_index
    ladder = [8, 16, 32, 64, 128]
    fine = sample_paths(TimeGrid(ladder[-1]), args.seed, args.samples)
    errors = []
    print(f"{name} ({args.variant}), {args.samples} samples, seed {args.seed}")
    for n in ladder:
        inc = fine.reshape(args.samples, n, -1).sum(axis=2)
        with np.errstate(all="ignore"):
            found, bad = survivors(problem, grid, rule, TimeGrid(n), inc)
        sq = []
        blown = 0
        for k, lv, i in found:
            b_T = inc[k].sum()
            ey = problem.exact_y(0.0, problem.x0, 0.0, b_T)
            ez = problem.exact_z(0.0, problem.x0, 0.0, b_T)
            diffs = np.array([lv.y_tilde[i, c] - ey, lv.y[i, c] - ey, lv.z[i, c] - ez])
            # finite but exploded paths would swamp the RMSE; count them separately
            if np.max(np.abs(diffs)) > BLOWN_UP:
                blown += 1
                continue
            sq.append(diffs ** 2)
        err = np.sqrt(np.mean(sq, axis=0))
        errors.append(err)
        print(f"N={n:4d} diverged={len(bad):3d} {bad[:10]} blown-up={blown:3d}  rmse(ytilde, y, z) over survivors = "
              + ", ".join(f"{e:.3e}" for e in err))
    errors = np.array(errors)
    rates = [fit_rate([1 / n for n in ladder], errors[:, m]) for m in range(3)]
    print("rates over survivors:", ", ".join("n/a" if r is None else f"{r:.2f}" for r in rates))


if __name__ == "__main__":
    main()
