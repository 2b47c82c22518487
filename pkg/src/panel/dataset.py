"""
Panel data containers: balanced panels, cross-sections and threshold schedules.
All containers are immutable after construction and safe to share between workers.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import InvalidOutcome, UnbalancedPanel, UnknownTime, PanelError

logger = logging.getLogger("panel")

# Relative tolerance used when matching a requested time label to the grid
TIME_MATCH_RTOL = 1e-12


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class CrossSection:
    """Outcomes of all individuals at one time, with order statistics and ranks."""
    values: np.ndarray
    sorted: np.ndarray
    ranks: np.ndarray
    time: Optional[float] = None

    @classmethod
    def from_values(cls, values: Iterable[float], time: Optional[float] = None) -> "CrossSection":
        """Build a cross-section; ties are ranked by stable input order."""
        arr = np.array(values, dtype=float).ravel()
        if arr.size == 0:
            raise PanelError("cross-section needs at least one observation")
        order = np.argsort(arr, kind="stable")
        ranks = np.empty(arr.size, dtype=np.int64)
        ranks[order] = np.arange(1, arr.size + 1)
        return cls(
            values=_frozen(arr),
            sorted=_frozen(arr[order]),
            ranks=_frozen(ranks),
            time=time,
        )

    @property
    def n(self) -> int:
        return int(self.values.size)

    def headcount(self, z: float) -> int:
        return headcount(self, z)

    def empirical_cdf(self, y):
        return empirical_cdf(self, y)


@dataclass(frozen=True)
class PanelDataset:
    """Balanced panel: n individuals observed at m strictly increasing times."""
    ids: Tuple[str, ...]
    times: np.ndarray
    values: np.ndarray  # shape (n, m)
    source: Optional[str] = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float).ravel()
        values = np.array(self.values, dtype=float)
        ids = tuple(str(i) for i in self.ids)

        if values.ndim != 2 or values.shape != (len(ids), times.size):
            raise UnbalancedPanel(
                f"values must have shape ({len(ids)}, {times.size}), got {values.shape}"
            )
        if len(set(ids)) != len(ids):
            raise PanelError("duplicate individual identifiers")
        if times.size == 0 or len(ids) == 0:
            raise PanelError("panel needs at least one individual and one time")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise PanelError("times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise InvalidOutcome("outcomes must be finite")
        if np.any(values < 0):
            j, i = np.argwhere(values < 0)[0]
            raise InvalidOutcome(
                f"negative outcome {values[j, i]} for id={ids[j]} at t={times[i]}"
            )

        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_arrays(cls, values, times: Optional[Sequence[float]] = None,
                    ids: Optional[Sequence[str]] = None) -> "PanelDataset":
        """Build a panel from an (n, m) array, generating default labels."""
        values = np.atleast_2d(np.asarray(values, dtype=float))
        n, m = values.shape
        if times is None:
            times = np.arange(1, m + 1, dtype=float)
        if ids is None:
            ids = [f"i{j + 1}" for j in range(n)]
        return cls(ids=tuple(ids), times=np.asarray(times, dtype=float), values=values)

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def m(self) -> int:
        return int(self.times.size)

    def time_index(self, t: float) -> int:
        """Grid position of time label t."""
        t = float(t)
        hits = np.flatnonzero(np.isclose(self.times, t, rtol=TIME_MATCH_RTOL, atol=0.0))
        if hits.size == 0:
            raise UnknownTime(f"time {t} is not on the panel grid {list(self.times)}")
        return int(hits[0])

    def cross_section(self, t: float) -> CrossSection:
        return cross_section(self, t)

    def duplicated(self, copies: int = 2) -> "PanelDataset":
        """Panel with every individual repeated `copies` times."""
        ids = [f"{i}#{c}" for i in self.ids for c in range(copies)]
        return PanelDataset(ids=tuple(ids), times=self.times.copy(),
                            values=np.repeat(self.values, copies, axis=0))


@dataclass(frozen=True)
class ThresholdSchedule:
    """Time-dependent threshold Z(t) bounded by 0 < Z1 <= Z(t) <= Z2 < inf."""
    values: Dict[float, float]
    z_min: float = field(init=False)
    z_max: float = field(init=False)

    def __post_init__(self):
        if not self.values:
            raise PanelError("threshold schedule is empty")
        cleaned = {float(t): float(z) for t, z in self.values.items()}
        for t, z in cleaned.items():
            if not np.isfinite(z) or z <= 0:
                raise PanelError(f"threshold at t={t} must be positive and finite, got {z}")
        object.__setattr__(self, "values", dict(sorted(cleaned.items())))
        object.__setattr__(self, "z_min", min(cleaned.values()))
        object.__setattr__(self, "z_max", max(cleaned.values()))

    @classmethod
    def constant(cls, z: float, times: Iterable[float]) -> "ThresholdSchedule":
        return cls({float(t): float(z) for t in times})

    @classmethod
    def from_csv(cls, path: Path) -> "ThresholdSchedule":
        """Read a `time,z` CSV file."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Threshold file not found: {path}")
        frame = pd.read_csv(path)
        missing = {"time", "z"} - set(frame.columns)
        if missing:
            raise PanelError(f"threshold file {path} lacks columns {sorted(missing)}")
        return cls(dict(zip(frame["time"].astype(float), frame["z"].astype(float))))

    @property
    def times(self) -> List[float]:
        return list(self.values.keys())

    def at(self, t: float) -> float:
        """Threshold at grid time t."""
        t = float(t)
        if t in self.values:
            return self.values[t]
        for key, z in self.values.items():
            if np.isclose(key, t, rtol=TIME_MATCH_RTOL, atol=0.0):
                return z
        raise UnknownTime(f"no threshold defined at t={t}")

    def covers(self, times: Iterable[float]) -> bool:
        try:
            for t in times:
                self.at(t)
        except UnknownTime:
            return False
        return True


def cross_section(panel: PanelDataset, t: float) -> CrossSection:
    """Outcomes at grid time t (f_t(x) = x(t)) with order statistics and ranks."""
    column = panel.time_index(t)
    return CrossSection.from_values(panel.values[:, column], time=float(panel.times[column]))


def headcount(section: CrossSection, z: float) -> int:
    """Number of observations at or below the threshold (boundary counts)."""
    return int(np.searchsorted(section.sorted, z, side="right"))


def empirical_cdf(section: CrossSection, y):
    """Right-continuous empirical CDF, O(log n) per evaluation."""
    counts = np.searchsorted(section.sorted, y, side="right")
    if np.ndim(counts) == 0:
        return int(counts) / section.n
    return counts / section.n
