"""
Absolute and relative index variation between two times.

    Delta J   = J(s) - J(t)                 Gamma_4 = G(t,t) + G(s,s) - 2 G(t,s)
    Delta R J = (J(s) - J(t)) / J(t)        Gamma_5 = a1^2 G(t,t) + a2^2 G(s,s) + 2 a1 a2 G(s,t)

with a1 = -(1 + Delta R J)/J(t) and a2 = 1/J(t).
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml
from dataclasses_json import dataclass_json
from scipy import stats

from ..asymptotics.covariance import CovarianceEstimate, covariance_analytic, covariance_plugin
from ..asymptotics.models import DistributionModel
from ..errors import ConfigError, NegativeVariance, UndefinedRelativeChange
from ..indices.core import evaluate_index
from ..indices.spec import IndexSpec
from ..panel.dataset import PanelDataset, ThresholdSchedule, cross_section
from ..wmlg_io.config import QuadratureSettings

logger = logging.getLogger("variation")

# Negative delta-method variances down to this value are rounding noise
CLAMP_TOL = 1e-10
DEFAULT_TARGET = -0.5
TABLE1_PATH = Path(__file__).resolve().parents[2] / "data" / "reference" / "table1.yaml"


class Verdict(str, Enum):
    ACHIEVED = "achieved"
    NOT_ACHIEVED = "not-achieved"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DeltaVariances:
    gamma_4: float
    gamma_5: float
    a1: float
    a2: float


def _clamp(value: float, name: str) -> float:
    if value >= 0.0:
        return value
    if value >= -CLAMP_TOL:
        logger.warning(f"⚠️ {name} = {value:.3g} clamped to 0")
        return 0.0
    raise NegativeVariance(f"{name} = {value:.6g} is negative beyond tolerance {CLAMP_TOL:g}")


def delta_variances(cov: CovarianceEstimate, J_t: float, J_s: float, t: float, s: float) -> DeltaVariances:
    """Gamma_4, Gamma_5 and the delta-method coefficients a1, a2."""
    if J_t == 0.0:
        raise UndefinedRelativeChange(f"relative change from t={t:g} is undefined because J(t) = 0")
    g_tt = cov.entry(t, t)
    g_ss = cov.entry(s, s)
    g_ts = cov.entry(t, s)
    g_st = cov.entry(s, t)

    relative = (J_s - J_t) / J_t
    a1 = -(1.0 + relative) / J_t
    a2 = 1.0 / J_t
    gamma_4 = _clamp(g_tt + g_ss - 2.0 * g_ts, "Gamma_4")
    gamma_5 = _clamp(a1 * a1 * g_tt + a2 * a2 * g_ss + 2.0 * a1 * a2 * g_st, "Gamma_5")
    return DeltaVariances(gamma_4, gamma_5, a1, a2)


def normal_quantile(level: float) -> float:
    """u_{1 - level/2}."""
    return float(stats.norm.ppf(1.0 - level / 2.0))


def confidence_interval(point: float, variance: float, n: int, alpha: float) -> Tuple[float, float]:
    """point -/+ n^{-1/2} sqrt(variance) u_{1-alpha/2}."""
    if variance < 0:
        raise NegativeVariance(f"variance must be >= 0, got {variance}")
    if n < 1:
        raise ConfigError(f"sample size must be >= 1, got {n}")
    if not 0 < alpha < 1:
        raise ConfigError(f"level alpha must lie in (0, 1), got {alpha}")
    half_width = np.sqrt(variance) / np.sqrt(n) * normal_quantile(alpha)
    return float(point - half_width), float(point + half_width)


def verdict_for(interval: Tuple[float, float], target: float = DEFAULT_TARGET) -> Verdict:
    lower, upper = interval
    if upper <= target:
        return Verdict.ACHIEVED
    if lower > target:
        return Verdict.NOT_ACHIEVED
    return Verdict.INCONCLUSIVE


@dataclass_json
@dataclass
class VariationReport:
    """Everything needed to judge the change of one index between two times."""
    index: str
    t: float
    s: float
    n: int
    J_t: float
    J_s: float
    delta_j: float
    delta_rj: float
    gamma_4: float
    gamma_5: float
    a1: float
    a2: float
    level: float
    u: float
    interval_absolute: List[float]
    interval_relative: List[float]
    cov_method: str
    target: Optional[float] = None
    verdict: Optional[str] = None
    covariance: Dict[str, Any] = field(default_factory=dict)

    def save_json(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.report_dict(), f, indent=2)
        logger.info(f"💾 Variation report written to {path}")
        return path

    def report_dict(self) -> Dict[str, Any]:
        data = self.to_dict()
        if self.target is None:
            data.pop("target")
            data.pop("verdict")
        return data


def mdg_check(report: VariationReport, target: float = DEFAULT_TARGET) -> Verdict:
    """Achieved when the whole relative-change interval lies at or below `target`."""
    return verdict_for(tuple(report.interval_relative), target)


def variation_report(panel: PanelDataset, thresholds: ThresholdSchedule, spec: IndexSpec, t: float, s: float,
                     alpha: float = 0.05, cov_method: str = "plugin", target: Optional[float] = None,
                     model: Optional[DistributionModel] = None,
                     settings: Optional[QuadratureSettings] = None) -> VariationReport:
    """Indices, covariance, delta variances, intervals and (with a target) the verdict."""
    if np.isclose(t, s, rtol=1e-12, atol=0.0):
        raise ConfigError(f"variation needs two distinct times, got t = s = {t:g}")

    J_t = evaluate_index(cross_section(panel, t), thresholds.at(t), spec)
    J_s = evaluate_index(cross_section(panel, s), thresholds.at(s), spec)

    if cov_method == "plugin":
        cov = covariance_plugin(panel, [t, s], thresholds, spec)
    elif cov_method == "analytic":
        if model is None:
            raise ConfigError("analytic covariance needs a distribution model")
        cov = covariance_analytic(model, [t, s], thresholds, spec, settings)
    else:
        raise ConfigError(f"unknown covariance method '{cov_method}', use 'plugin' or 'analytic'")

    dv = delta_variances(cov, J_t, J_s, t, s)
    delta_j = J_s - J_t
    delta_rj = delta_j / J_t
    n = panel.n
    absolute = confidence_interval(delta_j, dv.gamma_4, n, alpha)
    relative = confidence_interval(delta_rj, dv.gamma_5, n, alpha)

    report = VariationReport(
        index=spec.label, t=float(t), s=float(s), n=n, J_t=J_t, J_s=J_s,
        delta_j=delta_j, delta_rj=delta_rj, gamma_4=dv.gamma_4, gamma_5=dv.gamma_5,
        a1=dv.a1, a2=dv.a2, level=alpha, u=normal_quantile(alpha),
        interval_absolute=list(absolute), interval_relative=list(relative),
        cov_method=cov.method, target=target,
        covariance={"gamma_tt": cov.entry(t, t), "gamma_ss": cov.entry(s, s), "gamma_ts": cov.entry(t, s)},
    )
    if target is not None:
        report.verdict = mdg_check(report, target).value
        logger.info(f"🎯 {spec.label}: Delta R J = {delta_rj:.6g}, verdict {report.verdict} (target {target:g})")
    return report


def format_variation_table(reports: List[VariationReport]) -> str:
    """Plain-text table: index, Delta J, Gamma_4 and the interval for Delta J."""
    level = reports[0].level if reports else 0.05
    header = f"{'Index J':<16}{'Delta J':>16}{'Gamma_4':>16}   CI {100 * (1 - level):g}% (Delta J)"
    lines = [header, "-" * 72]
    for r in reports:
        lo, hi = r.interval_absolute
        lines.append(f"{r.index:<16}{r.delta_j:>16.8f}{r.gamma_4:>16.8f}   [{lo:.8f}, {hi:.8f}]")
        if r.verdict is not None:
            rlo, rhi = r.interval_relative
            lines.append(f"{'':<16}Delta R J = {r.delta_rj:.6f} in [{rlo:.6f}, {rhi:.6f}] -> {r.verdict}")
    return "\n".join(lines)


def load_reference_table(path: Optional[Path] = None) -> Dict[str, Any]:
    """Published variation rows kept as regression metadata."""
    path = Path(path) if path else TABLE1_PATH
    if not path.exists():
        raise FileNotFoundError(f"Reference table not found: {path}")
    with open(path) as f:
        return yaml.safe_load(f)
