"""Nonlocal parabolic equations driven by stable-like jump operators: solvers, estimates and Monte Carlo checks."""

__version__ = "0.1.0"

from .grid import Field, Grid
from .kernel_model import AssumptionError, KernelSpec, LowerOrderSpec, QuadConfig, eval_symbol, preset
from .singular_integral import OperatorQuad, apply_A, apply_B, frac_laplacian
from .stable_heat_kernel import HeatKernelTable, build_kernel_table, convolve_G, eval_G
from .cauchy_solver import SolverConfig, solve_constant, solve_variable, sobolev_norm
from .martingale_mc import MCConfig, PathEnsemble, sample_symmetric_stable, simulate

__all__ = [
    "AssumptionError", "Field", "Grid", "HeatKernelTable", "KernelSpec", "LowerOrderSpec", "MCConfig",
    "OperatorQuad", "PathEnsemble", "QuadConfig", "SolverConfig", "apply_A", "apply_B", "build_kernel_table",
    "convolve_G", "eval_G", "eval_symbol", "frac_laplacian", "preset", "sample_symmetric_stable", "simulate",
    "solve_constant", "solve_variable", "sobolev_norm",
]
