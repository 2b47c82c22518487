"""
Empirical checks of the regularity hypotheses behind the limit theorems.

Every check returns DiagnosticIssue records instead of raising: a failed
hypothesis weakens the asymptotic statements but does not stop a run.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from ..errors import DegenerateModel, WMLGError
from ..indices.spec import IndexSpec
from ..panel.dataset import PanelDataset, ThresholdSchedule, cross_section, empirical_cdf
from ..wmlg_io.config import QuadratureSettings
from .bundle import H_PI_FLOOR, _limit_scalars
from .limits import limit_functions
from .models import DistributionModel

logger = logging.getLogger("diagnostics")

# A quotient is a spike when it exceeds this multiple of the median of the others;
# an individual increment is a jump when it exceeds this multiple of the median increment
SPIKE_FACTOR = 10.0
# Jumps are judged against at least this fraction of the median outcome
JUMP_SCALE_FLOOR = 0.01
SPIKE_FLOOR = 1e-12
DEFAULT_R = 0.25
HERMITE_NODES = 64
DENSITY_PROBS = np.linspace(0.01, 0.99, 99)
DIAGONAL_PROBS = np.linspace(0.05, 0.95, 19)


@dataclass
class DiagnosticIssue:
    """One finding of a hypothesis check."""
    hypothesis: str
    message: str
    severity: str  # 'error', 'warning', 'info'
    pair: Optional[Tuple[float, float]] = None
    value: Optional[float] = None


@dataclass
class DiagnosticReport:
    r: float
    source: str
    issues: List[DiagnosticIssue] = field(default_factory=list)
    quantities: Dict[str, Any] = field(default_factory=dict)

    def add(self, hypothesis: str, message: str, severity: str, pair=None, value=None) -> None:
        self.issues.append(DiagnosticIssue(hypothesis, message, severity, pair, value))

    @property
    def error_count(self) -> int:
        return sum(1 for i in self.issues if i.severity == "error")

    @property
    def flagged(self) -> List[DiagnosticIssue]:
        return [i for i in self.issues if i.severity in ("error", "warning")]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "r": self.r,
            "source": self.source,
            "quantities": self.quantities,
            "issues": [
                {"hypothesis": i.hypothesis, "message": i.message, "severity": i.severity,
                 "pair": list(i.pair) if i.pair else None, "value": i.value}
                for i in self.issues
            ],
        }


def _spikes(quotients: List[float]) -> List[int]:
    """Positions whose quotient dwarfs the median of the remaining ones."""
    flagged = []
    for i, q in enumerate(quotients):
        others = quotients[:i] + quotients[i + 1:]
        if not others or not np.isfinite(q):
            continue
        if q > SPIKE_FLOOR and q > SPIKE_FACTOR * float(np.median(others)):
            flagged.append(i)
    return flagged


def _jump(yt: np.ndarray, ys: np.ndarray) -> Optional[Tuple[int, float]]:
    """Largest per-individual increment when it dwarfs the median of the other increments."""
    steps = np.abs(ys - yt)
    if steps.size < 2:
        return None
    j = int(np.argmax(steps))
    others = np.delete(steps, j)
    scale = max(float(np.median(others)), SPIKE_FLOOR,
                JUMP_SCALE_FLOOR * float(np.median(np.abs(np.concatenate([yt, ys])))))
    if steps[j] > SPIKE_FACTOR * scale:
        return j, float(steps[j])
    return None


def _record_quotients(report: DiagnosticReport, hypothesis: str, pairs, quotients: List[float],
                      what: str, ceiling: Optional[float] = None,
                      jumps: Optional[Dict[int, str]] = None) -> None:
    report.quantities[hypothesis] = [
        {"t": t, "s": s, "quotient": q} for (t, s), q in zip(pairs, quotients)
    ]
    for i, q in enumerate(quotients):
        if not np.isfinite(q):
            report.add(hypothesis, f"{what} quotient is not finite", "error", pairs[i], q)
    reasons: Dict[int, str] = {i: "spikes" for i in _spikes(quotients)}
    if ceiling is not None:
        for i, q in enumerate(quotients):
            if np.isfinite(q) and q > ceiling:
                reasons.setdefault(i, f"exceeds the ceiling {ceiling:g}")
    for i, detail in (jumps or {}).items():
        reasons.setdefault(i, detail)
    for i in sorted(reasons):
        t, s = pairs[i]
        report.add(hypothesis, f"{what} quotient {reasons[i]} between t={t:g} and s={s:g}: {quotients[i]:.4g}",
                   "warning", pairs[i], quotients[i])


def _holder_scale(t: float, s: float, exponent: float) -> float:
    return abs(t - s) ** exponent


def _second_moment_gap(model: DistributionModel, t: float, s: float) -> float:
    """E|Y(t) - Y(s)|^2 by Gauss-Hermite quadrature over the copula."""
    nodes, weights = hermegauss(HERMITE_NODES)
    weights = weights / weights.sum()
    rho = model.correlation(t, s)
    a = nodes[:, None]
    b = nodes[None, :]
    xs = rho * a + np.sqrt(max(0.0, 1.0 - rho * rho)) * b
    yt = model.marginal(t).from_normal_score(np.broadcast_to(a, xs.shape))
    ys = model.marginal(s).from_normal_score(xs)
    return float(weights @ ((yt - ys) ** 2) @ weights)


def _check_bounds(report: DiagnosticReport, beta: float, xi: float) -> None:
    report.quantities["HL1"] = {"beta_hat": beta, "xi_hat": xi, "holds": bool(0 < beta <= xi < 1)}
    if beta <= 0:
        report.add("HL1", f"beta_hat = {beta:.4g}: some time has no mass below the lowest threshold", "error")
    if xi >= 1:
        report.add("HL1", f"xi_hat = {xi:.4g}: some time has all mass below the highest threshold", "error")


def hypothesis_diagnostics(source: Union[DistributionModel, PanelDataset], times: Sequence[float],
                           thresholds: ThresholdSchedule, r: float = 0.25,
                           spec: Optional[IndexSpec] = None,
                           settings: Optional[QuadratureSettings] = None,
                           quotient_ceiling: Optional[float] = None) -> DiagnosticReport:
    """
    Check HL1, H0-H3 (and HR3 when `spec` is given) on adjacent grid pairs.

    Quotients are |.| / |t - s|^{1+r} ((1+r)/2 for the density check). A quotient
    is flagged when it spikes against the other pairs or exceeds
    `quotient_ceiling`; on panels, an H3 pair is also flagged when a single
    individual's increment dwarfs the others'.
    """
    is_model = isinstance(source, DistributionModel)
    times = [float(t) for t in times]
    requested_r = r
    if not 0 < r < 0.5:
        r = DEFAULT_R
    report = DiagnosticReport(r=r, source="model" if is_model else "panel")
    if r != requested_r:
        report.add("H0", f"Hölder exponent r must lie in (0, 1/2), got {requested_r}; using {DEFAULT_R}",
                   "error", value=requested_r)

    if len(times) < 2:
        report.add("H0", "fewer than two grid times: continuity checks skipped", "info")
        return report

    pairs = list(zip(times, times[1:]))
    z_lo = min(thresholds.at(t) for t in times)
    z_hi = max(thresholds.at(t) for t in times)

    # HL1
    if is_model:
        beta = min(float(source.marginal(t).cdf(z_lo)) for t in times)
        xi = max(float(source.marginal(t).cdf(z_hi)) for t in times)
    else:
        sections = {t: cross_section(source, t) for t in times}
        beta = min(float(empirical_cdf(sections[t], z_lo)) for t in times)
        xi = max(float(empirical_cdf(sections[t], z_hi)) for t in times)
    _check_bounds(report, beta, xi)

    # H0: threshold continuity
    h0 = [(thresholds.at(t) - thresholds.at(s)) ** 2 / _holder_scale(t, s, 1 + r) for t, s in pairs]
    _record_quotients(report, "H0", pairs, h0, "|Z(s) - Z(t)|^2", quotient_ceiling)

    if is_model:
        _model_checks(report, source, pairs, thresholds, r, quotient_ceiling)
    else:
        report.add("H1", "density continuity needs a distribution model; not checked on panel data", "info")
        _panel_checks(report, sections, pairs, thresholds, r, quotient_ceiling)

    if spec is not None and is_model:
        _bound_checks(report, source, times, thresholds, spec, settings or QuadratureSettings())

    logger.info(f"🔍 Hypothesis diagnostics: {report.error_count} error(s), {len(report.flagged)} flagged")
    return report


def _model_checks(report: DiagnosticReport, model: DistributionModel, pairs, thresholds: ThresholdSchedule,
                  r: float, ceiling: Optional[float]) -> None:
    # H1: density continuity
    h1 = []
    try:
        for t, s in pairs:
            grid = np.union1d(model.marginal_quantile(t, DENSITY_PROBS), model.marginal_quantile(s, DENSITY_PROBS))
            gap = float(np.max(np.abs(model.marginal_density(t, grid) - model.marginal_density(s, grid))))
            h1.append(gap / _holder_scale(t, s, (1 + r) / 2))
        _record_quotients(report, "H1", pairs, h1, "sup |m_t - m_s|", ceiling)
    except DegenerateModel as e:
        report.add("H1", f"density continuity not checkable: {e}", "info")

    # H2: joint CDF on the diagonal and threshold probabilities
    h2 = []
    for t, s in pairs:
        ms = model.marginal(s)
        grid = np.unique(ms.ppf(DIAGONAL_PROBS))
        diag = max(abs(model.joint_cdf(t, s, u, u) - float(ms.cdf(u))) for u in grid)
        zt, zs = thresholds.at(t), thresholds.at(s)
        mt = model.marginal(t)
        level = abs(float(mt.cdf(zt)) - float(mt.cdf(min(zt, zs))))
        h2.append(max(diag, level) / _holder_scale(t, s, 1 + r))
    _record_quotients(report, "H2", pairs, h2, "joint-CDF diagonal", ceiling)

    # H3: mean-square continuity
    h3 = [_second_moment_gap(model, t, s) / _holder_scale(t, s, 1 + r) for t, s in pairs]
    _record_quotients(report, "H3", pairs, h3, "E|Y(t) - Y(s)|^2", ceiling)


def _panel_checks(report: DiagnosticReport, sections, pairs, thresholds: ThresholdSchedule, r: float,
                  ceiling: Optional[float]) -> None:
    h2, h3 = [], []
    jumps: Dict[int, str] = {}
    for i, (t, s) in enumerate(pairs):
        yt, ys = sections[t].values, sections[s].values
        n = yt.size
        grid = np.union1d(yt, ys)
        both = np.searchsorted(np.sort(np.maximum(yt, ys)), grid, side="right") / n
        single = np.searchsorted(sections[s].sorted, grid, side="right") / n
        diag = float(np.max(np.abs(both - single)))
        zt, zs = thresholds.at(t), thresholds.at(s)
        level = abs(float(empirical_cdf(sections[t], zt)) - float(empirical_cdf(sections[t], min(zt, zs))))
        h2.append(max(diag, level) / _holder_scale(t, s, 1 + r))
        h3.append(float(np.mean((yt - ys) ** 2)) / _holder_scale(t, s, 1 + r))
        jump = _jump(yt, ys)
        if jump is not None:
            jumps[i] = f"driven by a jump of {jump[1]:.4g} (individual #{jump[0]})"
    _record_quotients(report, "H2", pairs, h2, "joint-CDF diagonal", ceiling)
    _record_quotients(report, "H3", pairs, h3, "E|Y(t) - Y(s)|^2", ceiling, jumps)


def _bound_checks(report: DiagnosticReport, model: DistributionModel, times, thresholds: ThresholdSchedule,
                  spec: IndexSpec, settings: QuadratureSettings) -> None:
    lf = limit_functions(spec)
    values = {}
    for t in times:
        marginal = model.marginal(t)
        if marginal.is_degenerate:
            report.add("HR3", f"t={t:g}: point-mass marginal, bounds not checked", "info")
            continue
        try:
            sc = _limit_scalars(marginal, thresholds.at(t), lf, spec.cost, settings)
        except WMLGError as e:
            report.add("HR3", f"t={t:g}: {e}", "error")
            continue
        values[f"{t:g}"] = {"H_c": sc.H_c, "H_pi": sc.H_pi}
        if sc.H_c <= H_PI_FLOOR:
            report.add("HR3", f"t={t:g}: H_c = {sc.H_c:.3g} is not bounded away from 0", "warning", value=sc.H_c)
        if lf.ratio and sc.H_pi <= H_PI_FLOOR:
            report.add("HR3", f"t={t:g}: H_pi = {sc.H_pi:.3g} is not bounded away from 0", "error", value=sc.H_pi)
    report.quantities["HR3"] = values


def format_diagnostics(report: DiagnosticReport) -> str:
    """Format a diagnostic report for display."""
    lines = []
    errors = sum(1 for i in report.issues if i.severity == "error")
    warnings = sum(1 for i in report.issues if i.severity == "warning")
    infos = sum(1 for i in report.issues if i.severity == "info")
    lines.append(f"Hypothesis checks ({report.source}, r={report.r:g}): "
                 f"{errors} errors, {warnings} warnings, {infos} info")
    lines.append("-" * 60)

    hl1 = report.quantities.get("HL1")
    if hl1:
        lines.append(f"HL1: beta_hat={hl1['beta_hat']:.6g}, xi_hat={hl1['xi_hat']:.6g}, holds={hl1['holds']}")
    for name in ("H0", "H1", "H2", "H3"):
        rows = report.quantities.get(name)
        if rows:
            worst = max(row["quotient"] for row in rows)
            lines.append(f"{name}: max quotient {worst:.6g} over {len(rows)} pair(s)")

    if not report.issues:
        lines.append("✓ No hypothesis violations found")
    for issue in report.issues:
        icon = "❌" if issue.severity == "error" else "⚠️" if issue.severity == "warning" else "ℹ️"
        lines.append(f"{icon} {issue.hypothesis}: {issue.message}")
    return "\n".join(lines)
