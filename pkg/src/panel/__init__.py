"""Panel data: ingestion, cross-sections, headcounts and empirical CDFs."""

from .dataset import (
    CrossSection,
    PanelDataset,
    ThresholdSchedule,
    cross_section,
    empirical_cdf,
    headcount,
)
from .loader import ColumnMapping, load_panel, save_panel

__all__ = [
    "ColumnMapping",
    "CrossSection",
    "PanelDataset",
    "ThresholdSchedule",
    "cross_section",
    "empirical_cdf",
    "headcount",
    "load_panel",
    "save_panel",
]
