"""
Parametric distribution models for panel outcomes.

A DistributionModel carries one marginal law per grid time and a Gaussian
copula tying the times together. All quadrature runs on the normal-score
scale x, where an outcome is y = G_t^{-1}(Phi(x)).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from ..errors import DegenerateModel, UnknownTime

logger = logging.getLogger("distribution_model")


class Marginal:
    """Marginal law G_t with density m_t and quantile function."""

    name = "marginal"
    is_degenerate = False

    def cdf(self, y):
        raise NotImplementedError

    def pdf(self, y):
        raise NotImplementedError

    def ppf(self, p):
        raise NotImplementedError

    def from_normal_score(self, x):
        """G^{-1}(Phi(x)) without losing the upper tail."""
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, self.ppf(stats.norm.cdf(x)), self.isf(stats.norm.sf(x)))

    def isf(self, q):
        return self.ppf(1.0 - np.asarray(q, dtype=float))

    @property
    def support_lower(self) -> float:
        return float(self.ppf(0.0))

    def to_dict(self) -> Dict[str, float]:
        return {"law": self.name}


@dataclass(frozen=True)
class _ScipyMarginal(Marginal):
    """Marginal backed by a frozen scipy.stats distribution."""

    def _dist(self):
        raise NotImplementedError

    def cdf(self, y):
        return self._dist().cdf(y)

    def pdf(self, y):
        return self._dist().pdf(y)

    def ppf(self, p):
        return self._dist().ppf(p)

    def isf(self, q):
        return self._dist().isf(q)


@dataclass(frozen=True)
class Uniform(_ScipyMarginal):
    low: float = 0.0
    high: float = 1.0
    name = "uniform"

    def __post_init__(self):
        if not 0 <= self.low < self.high:
            raise DegenerateModel(f"uniform needs 0 <= low < high, got ({self.low}, {self.high})")

    def _dist(self):
        return stats.uniform(loc=self.low, scale=self.high - self.low)

    def from_normal_score(self, x):
        return self.low + (self.high - self.low) * stats.norm.cdf(x)

    def to_dict(self):
        return {"law": self.name, "low": self.low, "high": self.high}


@dataclass(frozen=True)
class Lognormal(_ScipyMarginal):
    mu: float = 0.0
    sigma: float = 1.0
    name = "lognormal"

    def __post_init__(self):
        if self.sigma <= 0:
            raise DegenerateModel(f"lognormal sigma must be > 0, got {self.sigma}")

    def _dist(self):
        return stats.lognorm(s=self.sigma, scale=np.exp(self.mu))

    def from_normal_score(self, x):
        return np.exp(self.mu + self.sigma * np.asarray(x, dtype=float))

    def to_dict(self):
        return {"law": self.name, "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class Exponential(_ScipyMarginal):
    rate: float = 1.0
    name = "exponential"

    def __post_init__(self):
        if self.rate <= 0:
            raise DegenerateModel(f"exponential rate must be > 0, got {self.rate}")

    def _dist(self):
        return stats.expon(scale=1.0 / self.rate)

    def to_dict(self):
        return {"law": self.name, "rate": self.rate}


@dataclass(frozen=True)
class PointMass(Marginal):
    """All mass at y0; the limit theory does not apply but sampling does."""
    value: float = 0.0
    name = "point_mass"
    is_degenerate = True

    def __post_init__(self):
        if self.value < 0:
            raise DegenerateModel(f"point mass must sit at y0 >= 0, got {self.value}")

    def cdf(self, y):
        return np.where(np.asarray(y, dtype=float) >= self.value, 1.0, 0.0)

    def pdf(self, y):
        raise DegenerateModel("point mass has no density")

    def ppf(self, p):
        return np.full(np.shape(p), self.value, dtype=float)

    def from_normal_score(self, x):
        return np.full(np.shape(x), self.value, dtype=float)

    @property
    def support_lower(self) -> float:
        return self.value

    def to_dict(self):
        return {"law": self.name, "value": self.value}


MARGINALS = {
    "uniform": Uniform,
    "lognormal": Lognormal,
    "exponential": Exponential,
    "point_mass": PointMass,
}


def marginal_from_dict(data: Dict) -> Marginal:
    data = dict(data)
    law = data.pop("law", None)
    if law not in MARGINALS:
        raise DegenerateModel(f"unknown marginal law '{law}', choose from {sorted(MARGINALS)}")
    return MARGINALS[law](**data)


@dataclass(frozen=True)
class GaussianCopula:
    """
    Gaussian copula over the grid times.

    `exchangeable`: corr(X_i, X_j) = rho for i != j, rho in [0, 1].
    `ar1`: corr(X_i, X_j) = rho**|i - j|, rho in (-1, 1].
    rho = 1 is the comonotone limit (one shared normal score).
    """
    structure: str = "exchangeable"
    rho: float = 0.0

    def __post_init__(self):
        if self.structure == "exchangeable":
            if not 0.0 <= self.rho <= 1.0:
                raise DegenerateModel(f"exchangeable copula needs rho in [0, 1], got {self.rho}")
        elif self.structure == "ar1":
            if not -1.0 < self.rho <= 1.0:
                raise DegenerateModel(f"AR(1) copula needs rho in (-1, 1], got {self.rho}")
        else:
            raise DegenerateModel(f"unknown copula structure '{self.structure}'")

    @classmethod
    def independence(cls) -> "GaussianCopula":
        return cls("exchangeable", 0.0)

    @classmethod
    def comonotone(cls) -> "GaussianCopula":
        return cls("exchangeable", 1.0)

    def correlation(self, i: int, j: int) -> float:
        if i == j:
            return 1.0
        if self.structure == "exchangeable":
            return float(self.rho)
        return float(self.rho ** abs(i - j))

    def sample_scores(self, rng: np.random.Generator, n: int, m: int) -> np.ndarray:
        """(n, m) standard normal scores with this correlation structure."""
        z = rng.standard_normal((n, m + 1))
        if self.structure == "exchangeable":
            common = z[:, :1]
            return np.sqrt(self.rho) * common + np.sqrt(1.0 - self.rho) * z[:, 1:]
        scores = np.empty((n, m))
        scores[:, 0] = z[:, 1]
        innovation = np.sqrt(max(0.0, 1.0 - self.rho ** 2))
        for i in range(1, m):
            scores[:, i] = self.rho * scores[:, i - 1] + innovation * z[:, i + 1]
        return scores

    def to_dict(self):
        return {"structure": self.structure, "rho": self.rho}


@dataclass(frozen=True)
class DistributionModel:
    """Per-time marginals G_t plus a Gaussian copula for the joint laws G_{t,s}."""
    times: Tuple[float, ...]
    marginals: Tuple[Marginal, ...]
    copula: GaussianCopula = field(default_factory=GaussianCopula.independence)

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        marginals = tuple(self.marginals)
        if len(times) == 0 or len(times) != len(marginals):
            raise DegenerateModel("model needs one marginal per grid time")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DegenerateModel("model times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "marginals", marginals)

    @classmethod
    def stationary(cls, marginal: Marginal, times: Sequence[float],
                   copula: Optional[GaussianCopula] = None) -> "DistributionModel":
        return cls(tuple(times), tuple(marginal for _ in times), copula or GaussianCopula.independence())

    @property
    def m(self) -> int:
        return len(self.times)

    def index_of(self, t: float) -> int:
        for i, s in enumerate(self.times):
            if np.isclose(s, float(t), rtol=1e-12, atol=0.0):
                return i
        raise UnknownTime(f"time {t} is not on the model grid {list(self.times)}")

    def marginal(self, t: float) -> Marginal:
        return self.marginals[self.index_of(t)]

    def marginal_cdf(self, t: float, y):
        return self.marginal(t).cdf(y)

    def marginal_density(self, t: float, y):
        return self.marginal(t).pdf(y)

    def marginal_quantile(self, t: float, p):
        return self.marginal(t).ppf(p)

    def correlation(self, t: float, s: float) -> float:
        return self.copula.correlation(self.index_of(t), self.index_of(s))

    def joint_cdf(self, t: float, s: float, u: float, v: float) -> float:
        """G_{t,s}(u, v) = P(Y(t) <= u, Y(s) <= v)."""
        a = float(self.marginal_cdf(t, u))
        b = float(self.marginal_cdf(s, v))
        if a <= 0.0 or b <= 0.0:
            return 0.0
        if a >= 1.0:
            return b
        if b >= 1.0:
            return a
        rho = self.correlation(t, s)
        if rho >= 1.0 - 1e-12:
            return min(a, b)
        if rho == 0.0:
            return a * b
        xa, xb = stats.norm.ppf(a), stats.norm.ppf(b)
        value = stats.multivariate_normal(mean=[0.0, 0.0], cov=[[1.0, rho], [rho, 1.0]],
                                          abseps=1e-9, releps=1e-9).cdf([xa, xb])
        return float(np.clip(value, max(0.0, a + b - 1.0), min(a, b)))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n independent trajectories, shape (n, m)."""
        scores = self.copula.sample_scores(rng, n, self.m)
        return np.column_stack([mg.from_normal_score(scores[:, i]) for i, mg in enumerate(self.marginals)])

    def to_dict(self) -> Dict:
        return {
            "times": list(self.times),
            "marginals": [mg.to_dict() for mg in self.marginals],
            "copula": self.copula.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "DistributionModel":
        times = data["times"]
        marg = data["marginals"]
        if isinstance(marg, dict):
            marg = [marg] * len(times)
        return cls(tuple(times), tuple(marginal_from_dict(d) for d in marg),
                   GaussianCopula(**data.get("copula", {})))
