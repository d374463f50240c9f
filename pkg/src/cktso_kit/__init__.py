"""Sparse LU factorization and triangular solves for circuit-simulation matrices."""

from .errors import (
    DimensionError,
    NumericallySingular,
    ParseError,
    SolverError,
    StaleSymbolic,
    StructurallySingular,
    UnsupportedFormat,
    ZeroDiagonal,
    ZeroPivot,
    ZeroRow,
)
from .factor import FactorContext, LUFactors, factor_driver, factor_full, fast_factor, refactor, tail_factor
from .mmio import read_matrix_market, write_matrix_market
from .preprocess import run_portfolio
from .solver import Solver, relative_residual
from .sparse import Permutation, ScalingPair, SparseMatrix, Triplets, to_csr

__version__ = "0.1.0"

__all__ = [
    "DimensionError",
    "FactorContext",
    "LUFactors",
    "NumericallySingular",
    "ParseError",
    "Permutation",
    "ScalingPair",
    "Solver",
    "SolverError",
    "SparseMatrix",
    "StaleSymbolic",
    "StructurallySingular",
    "Triplets",
    "UnsupportedFormat",
    "ZeroDiagonal",
    "ZeroPivot",
    "ZeroRow",
    "factor_driver",
    "factor_full",
    "fast_factor",
    "read_matrix_market",
    "refactor",
    "relative_residual",
    "run_portfolio",
    "tail_factor",
    "to_csr",
    "write_matrix_market",
]
