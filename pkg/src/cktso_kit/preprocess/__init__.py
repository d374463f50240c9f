from .dissection import dissection_groups, order_nd_cmd
from .fill import symbolic_fill_count
from .matching import StaticPivotResult, max_weight_matching
from .ordering import order_amd, order_amf, order_cmd
from .portfolio import (
    METHODS,
    OrderingCandidate,
    PreprocessResult,
    run_method,
    run_portfolio,
    static_pivot,
)

__all__ = [
    "METHODS",
    "OrderingCandidate",
    "PreprocessResult",
    "StaticPivotResult",
    "dissection_groups",
    "max_weight_matching",
    "order_amd",
    "order_amf",
    "order_cmd",
    "order_nd_cmd",
    "run_method",
    "run_portfolio",
    "static_pivot",
    "symbolic_fill_count",
]
