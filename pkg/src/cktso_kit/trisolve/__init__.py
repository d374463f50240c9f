from .plan import (
    DEFAULT_FRAC,
    DEFAULT_MIN_NNZ,
    DEFAULT_SLICES,
    LOWER,
    UPPER,
    SolvePlan,
    balanced_cuts,
    build_solve_plan,
    find_p0,
)
from .solve import solve_lower_par, solve_lower_seq, solve_upper_par, solve_upper_seq

__all__ = [
    "DEFAULT_FRAC",
    "DEFAULT_MIN_NNZ",
    "DEFAULT_SLICES",
    "LOWER",
    "UPPER",
    "SolvePlan",
    "balanced_cuts",
    "build_solve_plan",
    "find_p0",
    "solve_lower_par",
    "solve_lower_seq",
    "solve_upper_par",
    "solve_upper_seq",
]
