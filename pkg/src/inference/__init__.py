"""Delta-method inference on index variations."""

from .variation import (
    DeltaVariances,
    VariationReport,
    Verdict,
    confidence_interval,
    delta_variances,
    format_variation_table,
    load_reference_table,
    mdg_check,
    normal_quantile,
    variation_report,
    verdict_for,
)

__all__ = [
    "DeltaVariances",
    "VariationReport",
    "Verdict",
    "confidence_interval",
    "delta_variances",
    "format_variation_table",
    "load_reference_table",
    "mdg_check",
    "normal_quantile",
    "variation_report",
    "verdict_for",
]
