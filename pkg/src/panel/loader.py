"""
Long-format CSV ingestion for balanced panels.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ..errors import DuplicateObservation, InvalidOutcome, ParseError, UnbalancedPanel
from .dataset import PanelDataset

logger = logging.getLogger("panel_loader")

# CSV line number of the first data row (header is line 1)
FIRST_DATA_LINE = 2


@dataclass(frozen=True)
class ColumnMapping:
    """Names of the id, time and value columns in a long-format file."""
    id_column: str = "id"
    time_column: str = "time"
    value_column: str = "value"


def load_panel(path: Path, mapping: Optional[ColumnMapping] = None) -> PanelDataset:
    """
    Load a balanced panel from a long-format CSV file.

    Args:
        path: CSV file with one (id, time, value) observation per row
        mapping: column names, defaults to `id,time,value`

    Returns:
        PanelDataset with times sorted ascending and ids in first-seen order

    Raises:
        FileNotFoundError: file does not exist
        ParseError: missing column or unparsable row (row = CSV line number)
        DuplicateObservation: the same (id, time) pair appears twice
        UnbalancedPanel: some (id, time) cell is missing
        InvalidOutcome: negative or non-finite value
    """
    path = Path(path)
    mapping = mapping or ColumnMapping()
    if not path.exists():
        raise FileNotFoundError(f"Panel file not found: {path}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ParseError(f"{path}: {e}") from e

    columns = [mapping.id_column, mapping.time_column, mapping.value_column]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ParseError(f"{path}: missing columns {missing}")
    # Blank lines stay in the frame until here so that rows keep their file line numbers
    blank = frame.fillna("").apply(lambda column: column.str.strip() == "").all(axis=1)
    lines = (frame.index[~blank.to_numpy()] + FIRST_DATA_LINE).to_numpy()
    frame = frame[~blank].fillna("").reset_index(drop=True)
    if frame.empty:
        raise ParseError(f"{path}: no observations")

    ids = frame[mapping.id_column].str.strip()
    times = pd.to_numeric(frame[mapping.time_column].str.strip(), errors="coerce")
    values = pd.to_numeric(frame[mapping.value_column].str.strip(), errors="coerce")

    for label, series in ((mapping.id_column, ids == ""),
                          (mapping.time_column, times.isna()),
                          (mapping.value_column, values.isna())):
        bad = np.flatnonzero(series.to_numpy())
        if bad.size:
            row = int(bad[0])
            raise ParseError(
                f"cannot parse {label} '{frame.iloc[row][label]}'", row=int(lines[row])
            )

    values_np = values.to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values_np) | (values_np < 0))
    if bad.size:
        row = int(bad[0])
        raise InvalidOutcome(
            f"row {lines[row]}: outcome {values_np[row]} must be finite and >= 0"
        )

    long = pd.DataFrame({"id": ids, "time": times.astype(float), "value": values_np})
    dupes = long.duplicated(subset=["id", "time"], keep="first")
    if dupes.any():
        row = int(np.flatnonzero(dupes.to_numpy())[0])
        raise DuplicateObservation(
            f"row {lines[row]}: duplicate observation for id={long.iloc[row]['id']} "
            f"at t={long.iloc[row]['time']}"
        )

    wide = long.pivot(index="id", columns="time", values="value")
    wide = wide.reindex(index=pd.unique(long["id"])).sort_index(axis=1)
    if wide.isna().to_numpy().any():
        j, i = np.argwhere(wide.isna().to_numpy())[0]
        raise UnbalancedPanel(
            f"missing observation for id={wide.index[j]} at t={wide.columns[i]} "
            f"({int(wide.isna().to_numpy().sum())} missing cells)"
        )

    panel = PanelDataset(
        ids=tuple(wide.index),
        times=wide.columns.to_numpy(dtype=float),
        values=wide.to_numpy(dtype=float),
        source=str(path),
    )
    logger.info(f"Loaded panel from {path}: n={panel.n}, m={panel.m}")
    return panel


def save_panel(panel: PanelDataset, path: Path, mapping: Optional[ColumnMapping] = None) -> Path:
    """Write a panel in long format, one row per (id, time)."""
    mapping = mapping or ColumnMapping()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({
        mapping.id_column: np.repeat(np.array(panel.ids, dtype=object), panel.m),
        mapping.time_column: np.tile(panel.times, panel.n),
        mapping.value_column: panel.values.ravel(),
    })
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Wrote panel to {path}")
    return path
