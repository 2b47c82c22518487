"""
Finite-sample upper-threshold weighted mean loss statistics.

All statistics depend on the data only through the order statistics at or
below the threshold and the relative gaps (z - Y_{j,n}) / z.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from ..errors import InvalidIndexSpec, SeriesComputationError, WMLGError
from ..panel.dataset import CrossSection, PanelDataset, ThresholdSchedule, cross_section, headcount
from .cost import CostFunction
from .spec import IndexKind, IndexSpec
from .weights import WeightScheme

logger = logging.getLogger("index_core")


def _check_threshold(z: float) -> float:
    z = float(z)
    if not np.isfinite(z) or z <= 0:
        raise InvalidIndexSpec(f"threshold must be positive and finite, got {z}")
    return z


def wmlg_general(section: CrossSection, z: float, scheme: WeightScheme, cost: CostFunction) -> float:
    """
    General weighted mean loss statistic.

    Returns A(n,Q)/(n B(Q)) * sum_{j<=Q} w(mu1 n + mu2 Q - mu3 j + mu4) d((z - Y_{j,n})/z),
    and 0 when no observation lies at or below z.
    """
    z = _check_threshold(z)
    n = section.n
    q = headcount(section, z)
    if q == 0:
        return 0.0

    args = scheme.arguments(n, q)
    b = scheme.prefix_sum(q)
    s = float(np.sum(scheme.weights(args) * cost.gap(section.sorted[:q], z)))
    a = float(scheme.scale(n, q))
    return (a * s) / (n * b)


def kakwani_index(section: CrossSection, z: float, k: int, cost: Optional[CostFunction] = None) -> float:
    """Kakwani statistic of parameter k (Sen for k = 1)."""
    if int(k) != k or k < 1:
        raise InvalidIndexSpec(f"Kakwani parameter k must be an integer >= 1, got {k}")
    return wmlg_general(section, z, _kakwani_scheme(int(k)), cost or CostFunction.identity())


_KAKWANI_SCHEMES = {}


def _kakwani_scheme(k: int) -> WeightScheme:
    scheme = _KAKWANI_SCHEMES.get(k)
    if scheme is None:
        scheme = _KAKWANI_SCHEMES.setdefault(k, WeightScheme.kakwani(k))
    return scheme


_UNIT_SCHEME = WeightScheme.unit()


def shorrocks_thon_index(section: CrossSection, z: float, variant: str = "thon",
                         cost: Optional[CostFunction] = None) -> float:
    """Thon: sum (2n - 2j + 1) d / n**2; Shorrocks normalizes by n(n+1)."""
    variant = IndexKind(variant)
    if variant not in (IndexKind.THON, IndexKind.SHORROCKS):
        raise InvalidIndexSpec(f"variant must be thon or shorrocks, got {variant.value}")
    z = _check_threshold(z)
    cost = cost or CostFunction.identity()
    n = section.n
    q = headcount(section, z)
    if q == 0:
        return 0.0

    j = np.arange(1, q + 1, dtype=float)
    s = float(np.sum((2.0 * n - 2.0 * j + 1.0) * cost.gap(section.sorted[:q], z)))
    norm = float(n) * n if variant is IndexKind.THON else float(n) * (n + 1)
    return s / norm


def fgt_index(section: CrossSection, z: float, alpha: float) -> float:
    """FGT(alpha); alpha = 0 is the headcount ratio (Y = z contributes 1)."""
    spec = IndexSpec.fgt(alpha)
    return wmlg_general(section, z, _UNIT_SCHEME, spec.cost)


def evaluate_index(section: CrossSection, z: float, spec: IndexSpec) -> float:
    """Dispatch an IndexSpec to its pointwise statistic."""
    kind = spec.kind
    if kind in (IndexKind.KAKWANI, IndexKind.SEN):
        return kakwani_index(section, z, spec.k, spec.cost)
    if kind in (IndexKind.THON, IndexKind.SHORROCKS):
        return shorrocks_thon_index(section, z, kind, spec.cost)
    if kind is IndexKind.FGT:
        return wmlg_general(section, z, _UNIT_SCHEME, spec.cost)
    return wmlg_general(section, z, spec.scheme, spec.cost)


def index_series(panel: PanelDataset, thresholds: ThresholdSchedule, spec: IndexSpec,
                 times: Optional[List[float]] = None, workers: int = 1) -> List[Tuple[float, float]]:
    """
    Compute J_n(t) at every requested grid time (all times by default).

    Results keep the grid order whatever the number of workers. A failure at
    one time is raised as SeriesComputationError carrying that time.
    """
    times = list(panel.times) if times is None else [float(t) for t in times]

    def one(t: float) -> Tuple[float, float]:
        try:
            section = cross_section(panel, t)
            return float(section.time), evaluate_index(section, thresholds.at(t), spec)
        except WMLGError as e:
            raise SeriesComputationError(t, e) from e

    if workers > 1 and len(times) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            series = list(pool.map(one, times))
    else:
        series = [one(t) for t in times]

    logger.debug(f"Computed {spec.label} at {len(series)} times")
    return series
