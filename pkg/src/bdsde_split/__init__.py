"""First-order splitting-up scheme for backward doubly stochastic differential equations."""

from .brownian import BrownianPath, TimeGrid, sample_path, sample_seed
from .experiment import ConvergenceReport, convergence_study, fit_rate, oracle_rmse, rmse
from .model import Problem, example_1, example_2, example_3, get_problem
from .quadrature import QuadratureRule, conditional_mean, conditional_mean_times_dw, hermite_rule
from .solver import SolveResult, solve_backward, step_bsde, step_sde, terminal_level
from .spatial import SpaceGrid, ValueLevel, build_grid, interpolate

__all__ = [
    "BrownianPath", "TimeGrid", "sample_path", "sample_seed",
    "ConvergenceReport", "convergence_study", "fit_rate", "oracle_rmse", "rmse",
    "Problem", "example_1", "example_2", "example_3", "get_problem",
    "QuadratureRule", "conditional_mean", "conditional_mean_times_dw", "hermite_rule",
    "SolveResult", "solve_backward", "step_bsde", "step_sde", "terminal_level",
    "SpaceGrid", "ValueLevel", "build_grid", "interpolate",
]
