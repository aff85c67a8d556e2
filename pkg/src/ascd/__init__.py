"""Coordinate descent with uniform, steepest and approximate-steepest
coordinate selection, plus the measurement tools around them."""

from .problem import (ColumnSparseMatrix, CompositeProblem, Regularizer,
                      ResidualState, model_value)
from .oracles import OracleOutput, OracleSpec, oracle_estimate
from .selector import (ActiveSet, Bounds, GradientEstimate, active_set,
                       compute_bounds, select_ascd, select_scd, select_ucd)
from .driver import (RunConfig, RunResult, UpdateRule, progress_delta,
                     progress_tau, run, write_trace_csv)
from .hardcase import HardCase, LowDimEmbedding, embed_lowdim, solve_c_alpha
from .ratiosim import RatioSimConfig, rho_infinity, simulate_rho
from .data import SynthConfig, generate_synthetic, load_svmlight, save_svmlight

__version__ = "0.1.0"

__all__ = [
    "ColumnSparseMatrix", "CompositeProblem", "Regularizer", "ResidualState",
    "model_value", "OracleOutput", "OracleSpec", "oracle_estimate",
    "ActiveSet", "Bounds", "GradientEstimate", "active_set", "compute_bounds",
    "select_ascd", "select_scd", "select_ucd", "RunConfig", "RunResult",
    "UpdateRule", "progress_delta", "progress_tau", "run", "write_trace_csv",
    "HardCase", "LowDimEmbedding", "embed_lowdim", "solve_c_alpha",
    "RatioSimConfig", "rho_infinity", "simulate_rho", "SynthConfig",
    "generate_synthetic", "load_svmlight", "save_svmlight",
]
