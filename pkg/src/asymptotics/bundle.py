"""
Population index and first-order representation of a weighted mean loss
statistic under a distribution model.

Everything is evaluated on the probability scale s = G_t(y), with
p = G_t(Z(t)), e(s) = 1(s <= p) and gamma(s) = d((Z - G_t^{-1}(s))/Z) e(s):

    H_c  = int_0^p c(p, s) gamma ds          K_c  = int_0^p dc/dx(p, s) gamma ds
    H_pi = int_0^p pi(p, s) ds               K_pi = int_0^p dpi/dx(p, s) ds
    g_c  = c gamma + K_c e                   nu_c  = dc/dy gamma
    g_pi = pi e + K_pi e                     nu_pi = dpi/dy e
    g    = g_c / H_pi - H_c g_pi / H_pi^2    nu    = nu_c / H_pi - H_c nu_pi / H_pi^2

so that sqrt(n)(J_n - J) = alpha_n(g) + beta_n(nu) + o_P(1) with J = H_c / H_pi.
Statistics without a denominator use H_pi = 1 and g = g_c, nu = nu_c.
The tail integral psi(u) = int_{x >= u} nu dG turns beta_n into an ordinary
empirical mean, which is what the covariance computations integrate.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import interpolate, stats

from ..errors import DegenerateModel, InvalidIndexSpec, QuadratureError
from ..indices.cost import CostFunction
from ..indices.spec import IndexKind, IndexSpec
from ..panel.dataset import ThresholdSchedule
from ..wmlg_io.config import QuadratureSettings
from .limits import LimitFunctions, limit_functions
from .models import DistributionModel, Marginal
from .quadrature import (
    converged,
    cumulative_tail,
    poor_axis,
    refine,
    scalar_integral,
    score_of,
)

logger = logging.getLogger("quadrature")

# H_pi below this is treated as a violated lower bound on the denominator
H_PI_FLOOR = 1e-12


@dataclass
class _Scalars:
    p: float
    x_p: float
    H_c: float
    H_pi: float
    K_c: float
    K_pi: float


def _kink_scores(cost: CostFunction, marginal: Marginal, z: float, bound: float) -> Tuple[float, ...]:
    scores = []
    for u in cost.kinks:
        s = float(marginal.cdf(z * (1.0 - u)))
        scores.append(score_of(s, bound))
    return tuple(scores)


def _limit_scalars(marginal: Marginal, z: float, lf: LimitFunctions, cost: CostFunction,
                   settings: QuadratureSettings) -> _Scalars:
    bound = settings.normal_score_bound
    p = float(marginal.cdf(z))
    x_p = score_of(p, bound)
    rtol = settings.rtol

    def gamma(x):
        return cost.gap(marginal.from_normal_score(x), z)

    def s_of(x):
        return stats.norm.cdf(x)

    H_c = scalar_integral(lambda x: lf.c(p, s_of(x)) * gamma(x), -bound, x_p, rtol, "H_c")
    if lf.x_free:
        K_c = 0.0
    else:
        K_c = scalar_integral(lambda x: lf.dc_dx(p, s_of(x)) * gamma(x), -bound, x_p, rtol, "K_c")
    if lf.ratio:
        H_pi = scalar_integral(lambda x: lf.pi(p, s_of(x)), -bound, x_p, rtol, "H_pi")
        K_pi = scalar_integral(lambda x: lf.dpi_dx(p, s_of(x)), -bound, x_p, rtol, "K_pi")
    else:
        H_pi, K_pi = 1.0, 0.0
    return _Scalars(p, x_p, H_c, H_pi, K_c, K_pi)


@dataclass
class TheoremOneBundle:
    """
    Limit quantities of one statistic at one time.

    Callables g, nu, g_c, g_pi, nu_c, nu_pi and psi take outcomes y;
    `terms` takes probabilities s with an explicit poor-set flag.
    """
    time: float
    z: float
    p: float
    H_c: float
    H_pi: float
    K_c: float
    K_pi: float
    K: float
    J: float
    eta: float = 0.0
    e_psi: float = 0.0
    ratio: bool = True
    degenerate: bool = False
    moments: Dict[str, float] = field(default_factory=dict)
    nodes: int = 0
    variant: str = "canonical"
    limit: Optional[LimitFunctions] = field(default=None, repr=False)
    cost: Optional[CostFunction] = field(default=None, repr=False)
    marginal: Optional[Marginal] = field(default=None, repr=False)
    x_p: float = 0.0
    bound: float = 8.0
    drop_gamma_in_g: bool = False
    _psi_spline: Any = field(default=None, repr=False)

    def terms(self, s, y, poor) -> Dict[str, np.ndarray]:
        """All representation functions at probabilities s (outcomes y)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        poor = np.atleast_1d(np.asarray(poor, dtype=bool))
        zeros = np.zeros(s.shape)
        if self.degenerate:
            return {k: zeros.copy() for k in ("gamma", "e", "g_c", "g_pi", "nu_c", "nu_pi", "g", "nu")}

        lf = self.limit
        e = poor.astype(float)
        gamma = np.where(poor, self.cost.gap(y, self.z), 0.0)
        sp = s[poor]

        c = zeros.copy()
        dc_dy = zeros.copy()
        c[poor] = lf.c(self.p, sp)
        dc_dy[poor] = lf.dc_dy(self.p, sp)
        weight = e if self.drop_gamma_in_g else gamma
        g_c = c * weight + self.K_c * e
        nu_c = dc_dy * gamma

        if lf.ratio:
            pi = zeros.copy()
            dpi_dy = zeros.copy()
            pi[poor] = lf.pi(self.p, sp)
            dpi_dy[poor] = lf.dpi_dy(self.p, sp)
            g_pi = pi * e + self.K_pi * e
            nu_pi = dpi_dy * e
            g = g_c / self.H_pi - self.H_c * g_pi / self.H_pi ** 2
            nu = nu_c / self.H_pi - self.H_c * nu_pi / self.H_pi ** 2
        else:
            g_pi = zeros.copy()
            nu_pi = zeros.copy()
            g, nu = g_c, nu_c

        return {"gamma": gamma, "e": e, "g_c": g_c, "g_pi": g_pi,
                "nu_c": nu_c, "nu_pi": nu_pi, "g": g, "nu": nu}

    def _at_outcomes(self, y, name: str) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.degenerate:
            return np.zeros(y.shape)
        return self.terms(self.marginal.cdf(y), y, y <= self.z)[name]

    def g(self, y):
        return self._at_outcomes(y, "g")

    def nu(self, y):
        return self._at_outcomes(y, "nu")

    def g_c(self, y):
        return self._at_outcomes(y, "g_c")

    def g_pi(self, y):
        return self._at_outcomes(y, "g_pi")

    def nu_c(self, y):
        return self._at_outcomes(y, "nu_c")

    def nu_pi(self, y):
        return self._at_outcomes(y, "nu_pi")

    def psi_scores(self, x, poor) -> np.ndarray:
        """Tail integral psi at normal scores x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        poor = np.atleast_1d(np.asarray(poor, dtype=bool))
        if self.degenerate or self._psi_spline is None:
            return np.zeros(x.shape)
        inside = np.clip(x, -self.bound, self.x_p)
        return np.where(poor, self._psi_spline(inside), 0.0)

    def psi(self, y):
        """psi(y) = int_{x >= y} nu(x) dG_t(x)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.degenerate:
            return np.zeros(y.shape)
        s = np.clip(self.marginal.cdf(y), 0.0, 1.0)
        x = np.clip(stats.norm.ppf(s), -self.bound, self.bound)
        return self.psi_scores(x, y <= self.z)

    def on_axis(self, axis) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(g - eta, psi, g) at the nodes of a score axis."""
        if self.degenerate:
            zeros = np.zeros(axis.size)
            return zeros, zeros, zeros
        y = self.marginal.from_normal_score(axis.x)
        g = self.terms(axis.s, y, axis.poor)["g"]
        return g - self.eta, self.psi_scores(axis.x, axis.poor), g

    @property
    def variance(self) -> float:
        """Gamma(t, t) from the one-dimensional moments."""
        return self.variance_components()["gamma"]

    def variance_components(self, centered_kappa: bool = True) -> Dict[str, float]:
        m = self.moments
        if self.degenerate or not m:
            return {"gamma_1": 0.0, "gamma_2": 0.0, "gamma_3": 0.0, "gamma": 0.0}
        gamma_1 = m["g_sq"] + (1.0 - self.p) * self.eta ** 2
        gamma_2 = m["psi_sq"] - m["e_psi"] ** 2
        gamma_3 = 2.0 * (m["g_psi"] if centered_kappa else m["g_psi_raw"])
        return {"gamma_1": gamma_1, "gamma_2": gamma_2, "gamma_3": gamma_3,
                "gamma": gamma_1 + gamma_2 + gamma_3}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "time": self.time, "z": self.z, "p": self.p,
            "H_c": self.H_c, "H_pi": self.H_pi, "K_c": self.K_c, "K_pi": self.K_pi,
            "K": self.K, "J": self.J, "eta": self.eta, "E_G_nu": self.e_psi,
            "ratio": self.ratio, "degenerate": self.degenerate, "variant": self.variant,
            "nodes": self.nodes,
        }


def _degenerate_index(marginal: Marginal, z: float, spec: IndexSpec) -> float:
    if spec.kind is IndexKind.GENERAL:
        raise DegenerateModel("general limit functions are undefined for a point-mass marginal")
    if marginal.support_lower > z:
        return 0.0
    return float(spec.cost.gap(np.array([marginal.support_lower]), z)[0])


def theorem_one_bundle(model: DistributionModel, t: float, thresholds: ThresholdSchedule,
                       spec: IndexSpec, settings: Optional[QuadratureSettings] = None,
                       drop_gamma_in_g: bool = False) -> TheoremOneBundle:
    """
    Limit quantities H_c, H_pi, K_c, K_pi, K, g, nu, eta, psi of `spec` at time t.

    `drop_gamma_in_g` builds the alternative g = c e (without gamma) that is
    only used when arbitrating between candidate formulas.
    """
    settings = settings or QuadratureSettings()
    marginal = model.marginal(t)
    z = thresholds.at(t)
    lf = limit_functions(spec)
    bound = settings.normal_score_bound

    if marginal.is_degenerate:
        J = _degenerate_index(marginal, z, spec)
        return TheoremOneBundle(time=float(t), z=z, p=float(marginal.cdf(z)), H_c=J, H_pi=1.0,
                                K_c=0.0, K_pi=0.0, K=0.0, J=J, ratio=lf.ratio, degenerate=True,
                                limit=lf, cost=spec.cost, marginal=marginal, bound=bound)

    sc = _limit_scalars(marginal, z, lf, spec.cost, settings)
    if sc.p <= 0.0:
        raise DegenerateModel(f"G_t(Z) = 0 at t={t}: no mass at or below the threshold")
    if lf.ratio and sc.H_pi < H_PI_FLOOR:
        raise DegenerateModel(f"H_pi = {sc.H_pi:.3g} at t={t} violates its lower bound")

    J = sc.H_c / sc.H_pi
    K = sc.K_c / sc.H_pi - sc.H_c * sc.K_pi / sc.H_pi ** 2 if lf.ratio else sc.K_c
    bundle = TheoremOneBundle(
        time=float(t), z=z, p=sc.p, H_c=sc.H_c, H_pi=sc.H_pi, K_c=sc.K_c, K_pi=sc.K_pi,
        K=K, J=J, ratio=lf.ratio, limit=lf, cost=spec.cost, marginal=marginal,
        x_p=sc.x_p, bound=bound, drop_gamma_in_g=drop_gamma_in_g,
        variant="without_gamma" if drop_gamma_in_g else "canonical",
    )

    def along(name):
        def f(x):
            return bundle.terms(stats.norm.cdf(x), marginal.from_normal_score(x), np.ones(np.shape(x), bool))[name]
        return f

    bundle.eta = scalar_integral(along("g"), -bound, sc.x_p, settings.rtol, "eta")
    nu = along("nu")
    bundle.e_psi = scalar_integral(lambda x: stats.norm.cdf(x) * nu(x), -bound, sc.x_p,
                                   settings.rtol, "E[G nu]")

    _tail_moments(bundle, settings, _kink_scores(spec.cost, marginal, z, bound))
    logger.debug(f"t={t}: J={J:.10g}, K={K:.6g}, eta={bundle.eta:.10g}, nodes={bundle.nodes}")
    return bundle


def _tail_moments(bundle: TheoremOneBundle, settings: QuadratureSettings, breaks) -> None:
    """Tabulate psi on a refined Simpson grid and the one-dimensional moments."""
    nodes = settings.prob_nodes
    previous = None
    for attempt in range(settings.max_refinements + 1):
        axis = poor_axis(bundle.x_p, nodes, bundle.bound, breaks)
        y = bundle.marginal.from_normal_score(axis.x)
        terms = bundle.terms(axis.s, y, axis.poor)
        g = terms["g"]
        centered = g - bundle.eta
        psi = cumulative_tail(terms["nu"], axis)
        w = axis.weights * axis.density
        current = np.array([w @ psi, w @ psi ** 2, w @ centered ** 2, w @ (centered * psi), w @ (g * psi)])

        if previous is not None and converged(previous, current, settings.rtol, np.max(np.abs(current))):
            break
        previous = current
        if attempt < settings.max_refinements:
            nodes = refine(nodes)
    else:
        raise QuadratureError(
            f"tail moments at t={bundle.time} did not reach rtol {settings.rtol:g} "
            f"after {settings.max_refinements} refinements"
        )

    keep = np.concatenate(([True], np.diff(axis.x) > 0))
    bundle._psi_spline = interpolate.CubicSpline(axis.x[keep], psi[keep])
    bundle.nodes = nodes
    bundle.moments = {
        "e_psi": float(current[0]),
        "psi_sq": float(current[1]),
        "g_sq": float(current[2]),
        "g_psi": float(current[3]),
        "g_psi_raw": float(current[4]),
    }


def exact_index(model: DistributionModel, t: float, thresholds: ThresholdSchedule,
                spec: IndexSpec, settings: Optional[QuadratureSettings] = None) -> float:
    """Population index J(t) = H_c(t) / H_pi(t) by quadrature."""
    settings = settings or QuadratureSettings()
    marginal = model.marginal(t)
    z = thresholds.at(t)
    if marginal.is_degenerate:
        return _degenerate_index(marginal, z, spec)

    lf = limit_functions(spec)
    sc = _limit_scalars(marginal, z, lf, spec.cost, settings)
    if sc.p <= 0.0:
        return 0.0
    if lf.ratio and sc.H_pi < H_PI_FLOOR:
        raise DegenerateModel(f"H_pi = {sc.H_pi:.3g} at t={t} violates its lower bound")
    return sc.H_c / sc.H_pi


def r_k(model: DistributionModel, t: float, thresholds: ThresholdSchedule,
        cost: CostFunction, k: int, settings: Optional[QuadratureSettings] = None) -> float:
    """r_k(t) = int_0^Z (G_t(Z) - G_t(y))^k gamma_t(y) dG_t(y)."""
    if k < 0:
        raise InvalidIndexSpec(f"r_k needs k >= 0, got {k}")
    settings = settings or QuadratureSettings()
    marginal = model.marginal(t)
    if marginal.is_degenerate:
        raise DegenerateModel("r_k is undefined for a point-mass marginal")
    z = thresholds.at(t)
    bound = settings.normal_score_bound
    p = float(marginal.cdf(z))
    x_p = score_of(p, bound)
    return scalar_integral(
        lambda x: (p - stats.norm.cdf(x)) ** k * cost.gap(marginal.from_normal_score(x), z),
        -bound, x_p, settings.rtol, f"r_{k}",
    )


def kakwani_exact_candidates(model: DistributionModel, t: float, thresholds: ThresholdSchedule,
                             cost: CostFunction, k: int,
                             settings: Optional[QuadratureSettings] = None) -> Dict[str, float]:
    """
    Direct quadrature of (k+1) int_0^Z (1 - G/G(Z))^e gamma dG for the two
    candidate exponents e = k and e = k - 1.
    """
    settings = settings or QuadratureSettings()
    marginal = model.marginal(t)
    z = thresholds.at(t)
    bound = settings.normal_score_bound
    p = float(marginal.cdf(z))
    if p <= 0.0:
        return {"exponent_k": 0.0, "exponent_k_minus_1": 0.0}
    x_p = score_of(p, bound)

    def candidate(exponent: int) -> float:
        return (k + 1) * scalar_integral(
            lambda x: (1.0 - stats.norm.cdf(x) / p) ** exponent * cost.gap(marginal.from_normal_score(x), z),
            -bound, x_p, settings.rtol, f"kakwani exponent {exponent}",
        )

    return {"exponent_k": candidate(k), "exponent_k_minus_1": candidate(k - 1)}


@dataclass(frozen=True)
class KCrossCheck:
    """K(t) from the combination formula, the literal closed form and a finite difference."""
    combination: float
    literal: float
    finite_difference: float

    @property
    def literal_matches(self) -> bool:
        return bool(np.isclose(self.literal, self.combination, rtol=1e-6, atol=1e-10))

    def to_dict(self) -> Dict[str, Any]:
        return {"combination": self.combination, "literal": self.literal,
                "finite_difference": self.finite_difference, "literal_matches": self.literal_matches}


def kakwani_literal_k(model: DistributionModel, t: float, thresholds: ThresholdSchedule,
                      cost: CostFunction, k: int,
                      settings: Optional[QuadratureSettings] = None) -> KCrossCheck:
    """
    Compare K(t) = K_c/H_pi - H_c K_pi/H_pi^2 with the closed form
    (k+1) k {G(Z)^{-k-1} r_{k-1} + r_k} and with a central difference of
    x -> int c(x, s) gamma ds / int pi(x, s) ds at x = G(Z).
    """
    settings = settings or QuadratureSettings()
    spec = IndexSpec.kakwani(k, cost)
    lf = limit_functions(spec)
    marginal = model.marginal(t)
    z = thresholds.at(t)
    sc = _limit_scalars(marginal, z, lf, cost, settings)
    if sc.p <= 0.0 or sc.H_pi < H_PI_FLOOR:
        raise DegenerateModel(f"K(t) undefined at t={t}: empty poor set")

    combination = sc.K_c / sc.H_pi - sc.H_c * sc.K_pi / sc.H_pi ** 2
    literal = (k + 1) * k * (sc.p ** (-k - 1) * r_k(model, t, thresholds, cost, k - 1, settings)
                             + r_k(model, t, thresholds, cost, k, settings))

    bound = settings.normal_score_bound
    h = 1e-5 * sc.p

    def ratio_at(x_val: float) -> float:
        num = scalar_integral(
            lambda x: lf.c(x_val, stats.norm.cdf(x)) * cost.gap(marginal.from_normal_score(x), z),
            -bound, sc.x_p, settings.rtol, "c(x, s)")
        den = scalar_integral(lambda x: lf.pi(x_val, stats.norm.cdf(x)), -bound, sc.x_p, settings.rtol, "pi(x, s)")
        return num / den

    finite_difference = (ratio_at(sc.p + h) - ratio_at(sc.p - h)) / (2 * h)
    if not np.isclose(literal, combination, rtol=1e-6):
        logger.info(f"K(t) at t={t}: literal closed form {literal:.8g} differs from "
                    f"combination {combination:.8g} (finite difference {finite_difference:.8g})")
    return KCrossCheck(combination, literal, finite_difference)
