"""
Limit functions c(x, y) and pi(x, y) of the weighted mean loss statistics.

With x the limit headcount ratio G_t(Z(t)) and y = G_t(Y), a statistic of
this family converges to J = H_c / H_pi where
    H_c  = int c(x, G) gamma dG,    H_pi = int pi(x, G) e dG.
Statistics without a denominator (Shorrocks, Thon, FGT) set `ratio=False`
and use J = H_c.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import InvalidIndexSpec
from ..indices.spec import IndexKind, IndexSpec

Fn = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Step for central differences when derivatives are not supplied
FD_STEP = 1e-6


def _central_dx(f: Fn) -> Fn:
    return lambda x, y: (f(x + FD_STEP, y) - f(x - FD_STEP, y)) / (2 * FD_STEP)


def _central_dy(f: Fn) -> Fn:
    return lambda x, y: (f(x, y + FD_STEP) - f(x, y - FD_STEP)) / (2 * FD_STEP)


def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


def _one(x, y):
    return np.ones(np.broadcast(x, y).shape)


@dataclass(frozen=True)
class LimitFunctions:
    """c, pi and their partial derivatives on (0, 1)^2."""
    name: str
    c: Fn = field(repr=False)
    dc_dx: Fn = field(repr=False)
    dc_dy: Fn = field(repr=False)
    pi: Fn = field(default=_one, repr=False)
    dpi_dx: Fn = field(default=_zero, repr=False)
    dpi_dy: Fn = field(default=_zero, repr=False)
    ratio: bool = True
    x_free: bool = False  # c does not depend on x, so K_c = 0

    @classmethod
    def from_functions(cls, name: str, c: Fn, pi: Optional[Fn] = None,
                       dc_dx: Optional[Fn] = None, dc_dy: Optional[Fn] = None,
                       dpi_dx: Optional[Fn] = None, dpi_dy: Optional[Fn] = None) -> "LimitFunctions":
        """User-supplied limit functions; missing derivatives use central differences."""
        if pi is None:
            return cls(name, c, dc_dx or _central_dx(c), dc_dy or _central_dy(c), ratio=False)
        return cls(
            name, c,
            dc_dx or _central_dx(c), dc_dy or _central_dy(c),
            pi, dpi_dx or _central_dx(pi), dpi_dy or _central_dy(pi),
            ratio=True,
        )

    @classmethod
    def kakwani(cls, k: int) -> "LimitFunctions":
        """c = (x - y)**k, pi = y**k / x."""
        return cls(
            f"kakwani({k})",
            c=lambda x, y: (x - y) ** k,
            dc_dx=lambda x, y: k * (x - y) ** (k - 1),
            dc_dy=lambda x, y: -k * (x - y) ** (k - 1),
            pi=lambda x, y: y ** k / x,
            dpi_dx=lambda x, y: -(y ** k) / x ** 2,
            dpi_dy=lambda x, y: k * y ** (k - 1) / x,
        )

    @classmethod
    def shorrocks_thon(cls) -> "LimitFunctions":
        """c = 2(1 - y): the limit of the weight (2n - 2j + 1)/n."""
        return cls(
            "shorrocks_thon",
            c=lambda x, y: 2.0 * (1.0 - y) + 0.0 * x,
            dc_dx=_zero,
            dc_dy=lambda x, y: -2.0 + 0.0 * (x + y),
            ratio=False,
            x_free=True,
        )

    @classmethod
    def unit(cls) -> "LimitFunctions":
        """c = 1: plain means such as FGT."""
        return cls("unit", c=_one, dc_dx=_zero, dc_dy=_zero, ratio=False, x_free=True)


def limit_functions(spec: IndexSpec) -> LimitFunctions:
    """Limit functions of a shipped index, or the ones attached to a general spec."""
    kind = spec.kind
    if kind in (IndexKind.KAKWANI, IndexKind.SEN):
        return LimitFunctions.kakwani(spec.k)
    if kind in (IndexKind.SHORROCKS, IndexKind.THON):
        return LimitFunctions.shorrocks_thon()
    if kind is IndexKind.FGT:
        return LimitFunctions.unit()
    if not isinstance(spec.limit, LimitFunctions):
        raise InvalidIndexSpec("general index needs LimitFunctions for limit theory")
    return spec.limit
