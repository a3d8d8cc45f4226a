"""Inexact trust-region and adaptive cubic regularization Newton methods.

Matrix-free second-order optimizers that tolerate sub-sampled gradients and
Hessians, with Krylov sub-problem solvers and propagation accounting.
"""

from .cubic_subproblem import CubicModel, lanczos_cubic, solve_cubic_subproblem
from .data_io import Dataset, make_synthetic_dataset, parse_libsvm, read_trace_csv, write_trace_csv
from .errors import DegenerateModel, NumericalError, ParseError, UsageError
from .negcurv import EigEstimate, approx_min_eig
from .optimizers import OptimizerConfig, RunResult, TraceRecord, compute_rho, run_arc, run_tr, with_sampling
from .oracle import ObjectiveOracle, PropLedger
from .problems import NlsProblem, QuadraticProblem, RosenbrockProblem, make_saddle_problem
from .sampling import SampleConfig, sample_sizes_for_accuracy
from .tr_subproblem import TrModel, solve_tr_subproblem

__version__ = "0.1.0"

__all__ = [
    "CubicModel", "Dataset", "DegenerateModel", "EigEstimate", "NlsProblem", "NumericalError",
    "ObjectiveOracle", "OptimizerConfig", "ParseError", "PropLedger", "QuadraticProblem",
    "RosenbrockProblem", "RunResult", "SampleConfig", "TraceRecord", "TrModel", "UsageError",
    "approx_min_eig", "compute_rho", "lanczos_cubic", "make_saddle_problem", "make_synthetic_dataset", "parse_libsvm",
    "read_trace_csv", "run_arc", "run_tr", "sample_sizes_for_accuracy", "solve_cubic_subproblem",
    "solve_tr_subproblem", "with_sampling", "write_trace_csv",
]
