"""Finite-sample weighted mean loss statistics."""

from .core import (
    evaluate_index,
    fgt_index,
    index_series,
    kakwani_index,
    shorrocks_thon_index,
    wmlg_general,
)
from .cost import COST_REGISTRY, CostFunction, fgt_cost, get_cost_function
from .spec import IndexKind, IndexSpec
from .weights import WeightScheme

__all__ = [
    "COST_REGISTRY",
    "CostFunction",
    "IndexKind",
    "IndexSpec",
    "WeightScheme",
    "evaluate_index",
    "fgt_cost",
    "fgt_index",
    "get_cost_function",
    "index_series",
    "kakwani_index",
    "shorrocks_thon_index",
    "wmlg_general",
]
