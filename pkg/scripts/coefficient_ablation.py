"""Compare convergence rates with the printed coefficients against the corrected ones.

    python3 scripts/coefficient_ablation.py [--samples 300] [--seed 42]

The printed forms of Examples 1 and 2 do not solve the stated equation, and
dropping the derivative-in-b term of the noise correction costs Y its first
order.  Each row is one ladder N = 8..128.
"""
import argparse
import dataclasses

import numpy as np

from bdsde_split.experiment import convergence_study
from bdsde_split.model import get_problem
from bdsde_split.solver import SolverDivergence

LADDER = [8, 16, 32, 64, 128]


def variants(name):
    base = get_problem(name)
    printed = get_problem(name + "-printed")
    yield "corrected", base
    yield "printed", printed
    # when the printed form only omits the b-derivative, the two rows coincide
    if base.g_b is not None and printed.g is not base.g:
        yield "no-levy", dataclasses.replace(base, g_b=None)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=300)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--examples", default="example1,example3")
    args = ap.parse_args()
    print(f"{'problem':10s} {'variant':10s} {'cr_ytilde':>9s} {'cr_y':>6s} {'cr_z':>6s} {'err_y(N=128)':>13s}")
    for name in args.examples.split(","):
        for label, problem in variants(name):
            try:
                with np.errstate(all="ignore"):
                    rep = convergence_study(problem, LADDER, args.samples, args.seed)
            except SolverDivergence as exc:
                print(f"{name:10s} {label:10s} diverged at sample {exc.sample}")
                continue
            rates = " ".join("   n/a" if r is None else f"{r:6.2f}" for r in rep.rates)
            print(f"{name:10s} {label:10s}    {rates} {rep.levels[-1].err_y:13.3e}", flush=True)


if __name__ == "__main__":
    main()
