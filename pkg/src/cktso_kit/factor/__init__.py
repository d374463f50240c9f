from .engine import (
    COMPLETED,
    DEFAULT_EPS,
    INTERRUPTED,
    FactorContext,
    FactorOutcome,
    factor_driver,
    factor_full,
    fast_factor,
    refactor,
    tail_factor,
)
from .lu import LUFactors

__all__ = [
    "COMPLETED",
    "DEFAULT_EPS",
    "INTERRUPTED",
    "FactorContext",
    "FactorOutcome",
    "LUFactors",
    "factor_driver",
    "factor_full",
    "fast_factor",
    "refactor",
    "tail_factor",
]
