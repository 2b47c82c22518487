"""
Cost functions d: [0, 1] -> [0, 1] applied to the relative gap (Z - y) / Z.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import InvalidCostFunction

logger = logging.getLogger("index_core")

# Grid used to check the bounds of a cost function at construction
CHECK_GRID = np.linspace(0.0, 1.0, 2001)
BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class CostFunction:
    """
    Bounded cost d with derivative bound M.

    `func` and `derivative` are vectorized over numpy arrays. Construction
    samples both on a grid of [0, 1] and rejects d outside [0, 1] or
    |d'| above M.
    """
    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    derivative: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    derivative_bound: float = 1.0
    params: Tuple[float, ...] = ()
    kinks: Tuple[float, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.func(CHECK_GRID), dtype=float)
        if not np.all(np.isfinite(values)) or values.min() < -BOUND_SLACK or values.max() > 1 + BOUND_SLACK:
            raise InvalidCostFunction(f"cost '{self.name}' leaves [0, 1] on the unit interval")
        if not np.isfinite(self.derivative_bound):
            raise InvalidCostFunction(f"cost '{self.name}' has an unbounded derivative")
        slopes = np.abs(np.asarray(self.derivative(CHECK_GRID), dtype=float))
        if not np.all(np.isfinite(slopes)) or slopes.max() > self.derivative_bound * (1 + 1e-9):
            raise InvalidCostFunction(
                f"cost '{self.name}' derivative exceeds bound M={self.derivative_bound}"
            )

    def __call__(self, u):
        return self.func(np.asarray(u, dtype=float))

    def gap(self, y, z: float):
        """d((z - y)/z) for outcomes y at or below z."""
        u = np.clip((z - np.asarray(y, dtype=float)) / z, 0.0, 1.0)
        return self.func(u)

    @property
    def full_deprivation(self) -> float:
        return float(self.func(np.array([1.0]))[0])

    # Registry constructors

    @classmethod
    def identity(cls) -> "CostFunction":
        return cls("identity", lambda u: np.array(u, dtype=float), np.ones_like, 1.0)

    @classmethod
    def power(cls, alpha: float) -> "CostFunction":
        """d(u) = u**alpha; alpha = 0 is the indicator (0**0 = 1)."""
        alpha = float(alpha)
        if alpha < 0:
            raise InvalidCostFunction(f"power exponent must be >= 0, got {alpha}")
        if 0 < alpha < 1:
            raise InvalidCostFunction(
                f"power({alpha}) has an unbounded derivative at 0; use alpha = 0 or alpha >= 1"
            )
        if alpha == 0:
            return cls("power(0)", lambda u: np.ones_like(u, dtype=float), np.zeros_like, 0.0, (0.0,))
        return cls(
            f"power({alpha:g})",
            lambda u: np.power(u, alpha),
            lambda u: alpha * np.power(u, alpha - 1.0),
            alpha,
            (alpha,),
        )

    @classmethod
    def piecewise_linear(cls, knots: Sequence[Tuple[float, float]], name: str = "piecewise") -> "CostFunction":
        """Linear interpolation through (u, d) knots spanning [0, 1]."""
        pts = np.asarray(sorted(knots), dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise InvalidCostFunction("piecewise-linear cost needs at least two (u, d) knots")
        u, d = pts[:, 0], pts[:, 1]
        if u[0] != 0.0 or u[-1] != 1.0:
            raise InvalidCostFunction("knots must start at u=0 and end at u=1")
        if np.any(np.diff(u) <= 0):
            raise InvalidCostFunction("knot positions must be strictly increasing")
        slopes = np.diff(d) / np.diff(u)

        def derivative(x):
            idx = np.clip(np.searchsorted(u, x, side="right") - 1, 0, slopes.size - 1)
            return slopes[idx]

        return cls(
            name,
            lambda x: np.interp(x, u, d),
            derivative,
            float(np.max(np.abs(slopes))),
            tuple(pts.ravel()),
            tuple(float(v) for v in u[1:-1]),
        )

    @classmethod
    def from_knots_file(cls, path: Path) -> "CostFunction":
        """Read knots from a two-column `u,d` CSV file."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Knots file not found: {path}")
        frame = pd.read_csv(path)
        if list(frame.columns[:2]) != ["u", "d"]:
            raise InvalidCostFunction(f"{path}: expected header 'u,d'")
        return cls.piecewise_linear(list(zip(frame["u"], frame["d"])), name=f"piecewise({path.name})")


def fgt_cost(alpha: float) -> CostFunction:
    """u**alpha for any alpha >= 0, without the derivative bound check."""
    alpha = float(alpha)
    if alpha < 0:
        raise InvalidCostFunction(f"FGT exponent must be >= 0, got {alpha}")
    if alpha == 0 or alpha >= 1:
        return CostFunction.power(alpha)
    return _UncheckedCost(f"power({alpha:g})", lambda u: np.power(u, alpha),
                          lambda u: alpha * np.power(u, alpha - 1.0), np.inf, (alpha,))


class _UncheckedCost(CostFunction):
    """Cost whose derivative is unbounded at 0 (FGT with 0 < alpha < 1)."""

    def __post_init__(self):
        values = np.asarray(self.func(CHECK_GRID), dtype=float)
        if values.min() < -BOUND_SLACK or values.max() > 1 + BOUND_SLACK:
            raise InvalidCostFunction(f"cost '{self.name}' leaves [0, 1] on the unit interval")


COST_REGISTRY: Dict[str, Callable[..., CostFunction]] = {
    "identity": lambda **_: CostFunction.identity(),
    "power": lambda alpha=1.0, **_: CostFunction.power(alpha),
    "piecewise": lambda knots_file=None, **_: CostFunction.from_knots_file(knots_file),
}


def get_cost_function(name: str, alpha: Optional[float] = None,
                      knots_file: Optional[Path] = None) -> CostFunction:
    """Look up a cost function in the named registry."""
    if name not in COST_REGISTRY:
        raise InvalidCostFunction(f"unknown cost '{name}', choose from {sorted(COST_REGISTRY)}")
    if name == "piecewise" and knots_file is None:
        raise InvalidCostFunction("piecewise cost needs a knots file")
    kwargs = {}
    if alpha is not None:
        kwargs["alpha"] = alpha
    if knots_file is not None:
        kwargs["knots_file"] = knots_file
    return COST_REGISTRY[name](**kwargs)
