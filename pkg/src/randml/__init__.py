"""Exact-distribution workbench for a probabilistic ML-like language.

The package computes step-indexed execution distributions of small
probabilistic programs with exact rational arithmetic, decides
approximate couplings between finite subdistributions, validates the
side conditions of sampling coupling rules, and reproduces a set of
quantitative equivalence bounds by brute-force enumeration.
"""

from .dist import Dist, tv_distance, uniform, uniform_lists
from .parser import parse, parse_program
from .printer import print_expr
from .semantics import Cfg, State, exec_approx, exec_n, pexec_n, step

__all__ = [
    "Dist", "tv_distance", "uniform", "uniform_lists",
    "parse", "parse_program", "print_expr",
    "Cfg", "State", "exec_approx", "exec_n", "pexec_n", "step",
]

__version__ = "0.1.0"
