"""
Asymptotic covariance Gamma(t, s) of sqrt(n)(J_n - J).

    Gamma   = Gamma_1 + Gamma_2 + Gamma_3
    Gamma_1 = E[(g_t(Y(t)) - eta(t)) (g_s(Y(s)) - eta(s))]
    Gamma_2 = E[psi_t(Y(t)) psi_s(Y(s))] - E[G_t nu_t] E[G_s nu_s]
    Gamma_3 = kappa(g_t, nu_s) + kappa(g_s, nu_t)

with kappa(g_t, nu_s) = E[(g_t(Y(t)) - eta(t)) psi_s(Y(s))]. Setting
`centered_kappa=False` drops the eta(t) term inside kappa.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from dataclasses_json import dataclass_json

from ..errors import DegenerateCrossSection, InternalError, UnknownTime
from ..indices.spec import IndexSpec
from ..panel.dataset import PanelDataset, ThresholdSchedule, cross_section
from ..wmlg_io.config import QuadratureSettings
from .bundle import TheoremOneBundle, _kink_scores, theorem_one_bundle
from .limits import limit_functions
from .models import DistributionModel
from .quadrature import comonotone_axis, converged, gaussian_weight_matrix, refine, split_axis

logger = logging.getLogger("covariance")

COMPONENTS = ("gamma", "gamma_1", "gamma_2", "gamma_3")
ANALYTIC = "analytic-quadrature"
PLUGIN = "plug-in-empirical"

# Correlations at or above this are treated as the comonotone limit
COMONOTONE_RHO = 1.0 - 1e-12
# Joint grids are refined at most this many times
MAX_JOINT_REFINEMENTS = 2
SYMMETRY_TOL = 1e-10
# Plug-in estimates below this sample size get a warning
MIN_PLUGIN_N = 30


@dataclass_json
@dataclass
class CovarianceEstimate:
    """Gamma and its three components over a list of grid times."""
    times: List[float]
    gamma: List[List[float]]
    gamma_1: List[List[float]]
    gamma_2: List[List[float]]
    gamma_3: List[List[float]]
    method: str
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_components(cls, times: Sequence[float], g1: np.ndarray, g2: np.ndarray, g3: np.ndarray,
                        method: str, diagnostics: Optional[Dict[str, Any]] = None) -> "CovarianceEstimate":
        total = g1 + g2 + g3
        return cls(
            times=[float(t) for t in times],
            gamma=total.tolist(), gamma_1=g1.tolist(), gamma_2=g2.tolist(), gamma_3=g3.tolist(),
            method=method, diagnostics=diagnostics or {},
        )

    def matrix(self, component: str = "gamma") -> np.ndarray:
        if component not in COMPONENTS:
            raise KeyError(f"unknown covariance component '{component}'")
        return np.asarray(getattr(self, component), dtype=float)

    def position(self, t: float) -> int:
        for i, s in enumerate(self.times):
            if np.isclose(s, float(t), rtol=1e-12, atol=0.0):
                return i
        raise UnknownTime(f"time {t} is not covered by this covariance estimate {self.times}")

    def entry(self, t: float, s: float, component: str = "gamma") -> float:
        return float(self.matrix(component)[self.position(t), self.position(s)])

    def stray_term_variant(self) -> np.ndarray:
        """Gamma_1 + 2 Gamma_2 + Gamma_3: the covariance with the duplicated Gamma_2 term."""
        return self.matrix("gamma_1") + 2.0 * self.matrix("gamma_2") + self.matrix("gamma_3")

    def to_frame(self, component: str = "gamma") -> pd.DataFrame:
        labels = [f"{t:g}" for t in self.times]
        return pd.DataFrame(self.matrix(component), index=pd.Index(labels, name="time"), columns=labels)

    def to_csv(self, path: Path, component: str = "gamma") -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame(component).to_csv(path, float_format="%.17g")
        logger.info(f"💾 Covariance matrix written to {path}")
        return path

    def save_json(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
        logger.info(f"💾 Covariance report written to {path}")
        return path


# Analytic covariance

def _independent_cell(bt: TheoremOneBundle, bs: TheoremOneBundle, centered: bool) -> Tuple[float, float, float]:
    """Under independence every expectation factorizes; centered terms vanish."""
    gamma_1 = 0.0
    gamma_2 = 0.0
    gamma_3 = 0.0 if centered else bt.eta * bs.e_psi + bs.eta * bt.e_psi
    return gamma_1, gamma_2, gamma_3


def _cell_values(gt, pt, rt, gs, ps, rs, weigh, centered: bool) -> np.ndarray:
    """[E g_t g_s, E psi_t psi_s, kappa_ts, kappa_st] for a bilinear expectation `weigh`."""
    kt = gt if centered else rt
    ks = gs if centered else rs
    return np.array([weigh(gt, gs), weigh(pt, ps), weigh(kt, ps), weigh(pt, ks)])


def _comonotone_cell(bt: TheoremOneBundle, bs: TheoremOneBundle, settings: QuadratureSettings,
                     breaks: Tuple[float, ...]) -> np.ndarray:
    nodes = settings.joint_nodes
    previous = None
    for attempt in range(MAX_JOINT_REFINEMENTS + 1):
        at, as_ = comonotone_axis([bt.x_p, bs.x_p], nodes, settings.normal_score_bound, breaks)
        w = at.weights * at.density
        current = _cell_values(*bt.on_axis(at), *bs.on_axis(as_),
                               lambda a, b: float(w @ (a * b)), settings.centered_kappa)
        if previous is not None and converged(previous, current, settings.joint_rtol, np.max(np.abs(current))):
            return current
        previous = current
        nodes = refine(nodes)
    logger.warning(f"⚠️ Comonotone cell ({bt.time}, {bs.time}) not converged to {settings.joint_rtol:g}")
    return current


def _gaussian_cell(bt: TheoremOneBundle, bs: TheoremOneBundle, rho: float, settings: QuadratureSettings,
                   breaks_t: Tuple[float, ...], breaks_s: Tuple[float, ...]) -> np.ndarray:
    nodes = settings.joint_nodes
    bound = settings.normal_score_bound
    previous = None
    for attempt in range(MAX_JOINT_REFINEMENTS + 1):
        at = split_axis(bt.x_p, nodes, bound, breaks_t)
        as_ = split_axis(bs.x_p, nodes, bound, breaks_s)
        W = gaussian_weight_matrix(at, as_, rho)
        ft = bt.on_axis(at)
        fs = bs.on_axis(as_)
        current = _cell_values(*ft, *fs, lambda a, b: float(a @ W @ b), settings.centered_kappa)
        if previous is not None and converged(previous, current, settings.joint_rtol, np.max(np.abs(current))):
            break
        previous = current
        if attempt < MAX_JOINT_REFINEMENTS:
            nodes = refine(nodes)
    else:
        logger.warning(f"⚠️ Joint cell ({bt.time}, {bs.time}) not converged to {settings.joint_rtol:g}")
    return current


def covariance_cell(model: DistributionModel, bt: TheoremOneBundle, bs: TheoremOneBundle,
                    settings: QuadratureSettings, breaks_t: Tuple[float, ...] = (),
                    breaks_s: Tuple[float, ...] = ()) -> Tuple[float, float, float]:
    """(Gamma_1, Gamma_2, Gamma_3) at one pair of distinct times."""
    if bt.degenerate or bs.degenerate:
        return 0.0, 0.0, 0.0
    rho = model.correlation(bt.time, bs.time)
    if rho == 0.0:
        return _independent_cell(bt, bs, settings.centered_kappa)
    if rho >= COMONOTONE_RHO:
        values = _comonotone_cell(bt, bs, settings, tuple(breaks_t) + tuple(breaks_s))
    else:
        values = _gaussian_cell(bt, bs, rho, settings, tuple(breaks_t), tuple(breaks_s))
    e_gg, e_pp, kappa_ts, kappa_st = values
    return float(e_gg), float(e_pp - bt.e_psi * bs.e_psi), float(kappa_ts + kappa_st)


def covariance_analytic(model: DistributionModel, times: Sequence[float], thresholds: ThresholdSchedule,
                        spec: IndexSpec, settings: Optional[QuadratureSettings] = None,
                        workers: int = 1, drop_gamma_in_g: bool = False) -> CovarianceEstimate:
    """
    Gamma over `times` under a distribution model by quadrature.

    Diagonal cells come from one-dimensional tail moments; off-diagonal
    cells integrate over the Gaussian copula on a product grid.
    """
    settings = settings or QuadratureSettings()
    times = [float(t) for t in times]
    logger.info(f"📐 Analytic covariance for {spec.label} over {len(times)} time(s)")

    bundles = {t: theorem_one_bundle(model, t, thresholds, spec, settings, drop_gamma_in_g) for t in times}
    breaks = {
        t: () if b.degenerate else _kink_scores(spec.cost, b.marginal, b.z, settings.normal_score_bound)
        for t, b in bundles.items()
    }

    m = len(times)
    g1, g2, g3 = np.zeros((m, m)), np.zeros((m, m)), np.zeros((m, m))
    for i, t in enumerate(times):
        parts = bundles[t].variance_components(settings.centered_kappa)
        g1[i, i], g2[i, i], g3[i, i] = parts["gamma_1"], parts["gamma_2"], parts["gamma_3"]

    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]

    def fill(pair):
        i, j = pair
        ti, tj = times[i], times[j]
        cell = covariance_cell(model, bundles[ti], bundles[tj], settings, breaks[ti], breaks[tj])
        swapped = covariance_cell(model, bundles[tj], bundles[ti], settings, breaks[tj], breaks[ti])
        if not np.allclose(cell, swapped, rtol=SYMMETRY_TOL, atol=SYMMETRY_TOL):
            raise InternalError(f"Gamma({ti}, {tj}) = {cell} but Gamma({tj}, {ti}) = {swapped}")
        return pair, cell

    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fill, pairs))
    else:
        results = [fill(pair) for pair in pairs]

    for (i, j), (c1, c2, c3) in results:
        g1[i, j] = g1[j, i] = c1
        g2[i, j] = g2[j, i] = c2
        g3[i, j] = g3[j, i] = c3

    total = g1 + g2 + g3
    if np.any(np.diag(total) < -SYMMETRY_TOL):
        raise InternalError(f"negative analytic variance on the diagonal: {np.diag(total)}")

    diagnostics = {
        "prob_nodes": {f"{t:g}": bundles[t].nodes for t in times},
        "joint_nodes": settings.joint_nodes,
        "rtol": settings.rtol,
        "joint_rtol": settings.joint_rtol,
        "centered_kappa": settings.centered_kappa,
        "g_variant": "without_gamma" if drop_gamma_in_g else "canonical",
        "J": {f"{t:g}": bundles[t].J for t in times},
        "eta": {f"{t:g}": bundles[t].eta for t in times},
    }
    return CovarianceEstimate.from_components(times, g1, g2, g3, ANALYTIC, diagnostics)


# Plug-in covariance

@dataclass
class PluginTerms:
    """Per-individual plug-in values of g_t and psi_t at one time."""
    time: float
    p: float
    J: float
    g: np.ndarray
    nu: np.ndarray
    psi: np.ndarray

    @property
    def eta(self) -> float:
        return float(self.g.mean())


def plugin_terms(values: np.ndarray, z: float, spec: IndexSpec, time: float = 0.0) -> PluginTerms:
    """
    Empirical versions of g_t, nu_t and psi_t for one cross-section.

    G_t is replaced by the right-continuous empirical CDF, G_t(Z) by the
    headcount ratio, and every dG_t integral by a sample mean.
    """
    lf = limit_functions(spec)
    y = np.asarray(values, dtype=float)
    n = y.size
    order = np.argsort(y, kind="stable")
    y_sorted = y[order]
    q = int(np.searchsorted(y_sorted, z, side="right"))
    if q == 0:
        raise DegenerateCrossSection(f"no observation at or below Z={z:g} at t={time:g}")

    p = q / n
    G = np.searchsorted(y_sorted, y, side="right") / n
    poor = y <= z
    e = poor.astype(float)
    gamma = np.where(poor, spec.cost.gap(y, z), 0.0)

    c = np.zeros(n)
    dc_dx = np.zeros(n)
    dc_dy = np.zeros(n)
    c[poor] = lf.c(p, G[poor])
    dc_dy[poor] = lf.dc_dy(p, G[poor])
    if not lf.x_free:
        dc_dx[poor] = lf.dc_dx(p, G[poor])

    H_c = float(np.mean(c * gamma))
    K_c = float(np.mean(dc_dx * gamma))
    g_c = c * gamma + K_c * e
    nu_c = dc_dy * gamma
    if lf.ratio:
        pi = np.zeros(n)
        dpi_dx = np.zeros(n)
        dpi_dy = np.zeros(n)
        pi[poor] = lf.pi(p, G[poor])
        dpi_dx[poor] = lf.dpi_dx(p, G[poor])
        dpi_dy[poor] = lf.dpi_dy(p, G[poor])
        H_pi = float(np.mean(pi * e))
        if H_pi <= 0.0:
            raise DegenerateCrossSection(f"plug-in H_pi vanishes at t={time:g}")
        K_pi = float(np.mean(dpi_dx * e))
        g_pi = pi * e + K_pi * e
        nu_pi = dpi_dy * e
        g = g_c / H_pi - H_c * g_pi / H_pi ** 2
        nu = nu_c / H_pi - H_c * nu_pi / H_pi ** 2
        J = H_c / H_pi
    else:
        g, nu, J = g_c, nu_c, H_c

    # psi_j = (1/n) sum over i with Y_i >= Y_j of nu_i
    suffix = np.concatenate((np.cumsum(nu[order][::-1])[::-1], [0.0]))
    psi = suffix[np.searchsorted(y_sorted, y, side="left")] / n
    return PluginTerms(time=float(time), p=p, J=J, g=g, nu=nu, psi=psi)


def covariance_plugin(panel: PanelDataset, times: Sequence[float], thresholds: ThresholdSchedule,
                      spec: IndexSpec, centered_kappa: bool = True) -> CovarianceEstimate:
    """Gamma over `times` with every population quantity replaced by its sample analogue."""
    times = [float(t) for t in times]
    n = panel.n
    if n < MIN_PLUGIN_N:
        logger.warning(f"⚠️ Plug-in covariance with n={n} < {MIN_PLUGIN_N}: estimates are unreliable")

    terms = []
    for t in times:
        section = cross_section(panel, t)
        terms.append(plugin_terms(section.values, thresholds.at(t), spec, t))

    G = np.column_stack([tm.g for tm in terms])
    P = np.column_stack([tm.psi for tm in terms])
    Gc = G - G.mean(axis=0)
    Pc = P - P.mean(axis=0)

    g1 = Gc.T @ Gc / n
    g2 = Pc.T @ Pc / n
    if centered_kappa:
        cross = Gc.T @ P / n
    else:
        cross = G.T @ P / n
    g3 = cross + cross.T

    diagnostics = {
        "n": n,
        "centered_kappa": centered_kappa,
        "headcount_ratio": {f"{tm.time:g}": tm.p for tm in terms},
        "J": {f"{tm.time:g}": tm.J for tm in terms},
    }
    logger.debug(f"Plug-in covariance over {len(times)} time(s), n={n}")
    return CovarianceEstimate.from_components(times, g1, g2, g3, PLUGIN, diagnostics)
