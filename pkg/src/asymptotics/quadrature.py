"""
Quadrature on the normal-score scale.

Integrals over the probability scale s in [0, 1] are computed after the
substitution s = Phi(x), x in [-B, B], where the integrands are smooth for
every shipped marginal. Node grids are split at x_p = Phi^{-1}(G_t(Z(t)))
because the limit functions jump there.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Sequence, Tuple

import numpy as np
from scipy import integrate, stats

from ..errors import QuadratureError

logger = logging.getLogger("quadrature")

QUAD_LIMIT = 200
QUAD_ABS_FLOOR = 1e-14


def score_of(p: float, bound: float) -> float:
    """Normal score of probability p, clipped to [-bound, bound]."""
    if p <= 0.0:
        return -bound
    if p >= 1.0:
        return bound
    return float(np.clip(stats.norm.ppf(p), -bound, bound))


def simpson_weights(x: np.ndarray) -> np.ndarray:
    """Composite Simpson weights for an equally spaced grid of odd length."""
    n = x.size
    if n < 3 or n % 2 == 0:
        raise QuadratureError(f"Simpson grid needs an odd number of nodes >= 3, got {n}")
    h = (x[-1] - x[0]) / (n - 1)
    w = np.full(n, 2.0)
    w[1:-1:2] = 4.0
    w[0] = w[-1] = 1.0
    return w * h / 3.0


def scalar_integral(integrand: Callable[[np.ndarray], np.ndarray], x_lo: float, x_hi: float,
                    rtol: float, what: str = "integral") -> float:
    """
    int_{x_lo}^{x_hi} integrand(x) phi(x) dx with adaptive Gauss-Kronrod.

    Raises QuadratureError when QUADPACK reports a problem or its error
    estimate exceeds rtol relative to the value.
    """
    if x_hi <= x_lo:
        return 0.0

    def f(x: float) -> float:
        return float(integrand(np.array([x]))[0]) * stats.norm.pdf(x)

    result = integrate.quad(f, x_lo, x_hi, epsabs=QUAD_ABS_FLOOR, epsrel=rtol / 10,
                            limit=QUAD_LIMIT, full_output=1)
    value, abserr = result[0], result[1]
    if len(result) > 3:
        raise QuadratureError(f"{what}: {result[3]}")
    if abserr > max(rtol * abs(value), QUAD_ABS_FLOOR * 100):
        raise QuadratureError(f"{what}: error estimate {abserr:.3g} exceeds rtol {rtol:g}")
    return float(value)


@dataclass(frozen=True)
class ScoreAxis:
    """
    Quadrature nodes x with Simpson weights and a poor-set flag per node.
    `bounds` lists the (start, stop) slice of every Simpson panel group.
    """
    x: np.ndarray
    weights: np.ndarray
    poor: np.ndarray
    bounds: Tuple[Tuple[int, int], ...] = ()

    @property
    def s(self) -> np.ndarray:
        return stats.norm.cdf(self.x)

    @property
    def density(self) -> np.ndarray:
        return stats.norm.pdf(self.x)

    @property
    def size(self) -> int:
        return int(self.x.size)


def _segment(lo: float, hi: float, nodes: int, poor: bool) -> ScoreAxis:
    x = np.linspace(lo, hi, nodes)
    return ScoreAxis(x, simpson_weights(x), np.full(nodes, poor), ((0, nodes),))


def concat_axes(parts: Sequence[ScoreAxis]) -> ScoreAxis:
    parts = [p for p in parts if p.size]
    if not parts:
        return ScoreAxis(np.empty(0), np.empty(0), np.empty(0, dtype=bool), ())
    bounds, offset = [], 0
    for p in parts:
        bounds.extend((a + offset, b + offset) for a, b in p.bounds)
        offset += p.size
    return ScoreAxis(
        np.concatenate([p.x for p in parts]),
        np.concatenate([p.weights for p in parts]),
        np.concatenate([p.poor for p in parts]),
        tuple(bounds),
    )


def _pieces(lo: float, hi: float, breaks: Iterable[float]) -> List[Tuple[float, float]]:
    inner = sorted({float(b) for b in breaks if lo < b < hi})
    edges = [lo, *inner, hi]
    return [(a, b) for a, b in zip(edges, edges[1:]) if b > a]


def poor_axis(x_p: float, nodes: int, bound: float, breaks: Iterable[float] = ()) -> ScoreAxis:
    """Grid on [-B, x_p], the poor set of one time, split at `breaks`."""
    if x_p <= -bound:
        return concat_axes([])
    return concat_axes([_segment(a, b, nodes, True) for a, b in _pieces(-bound, x_p, breaks)])


def split_axis(x_p: float, nodes: int, bound: float, breaks: Iterable[float] = ()) -> ScoreAxis:
    """Grid on [-B, B] with separate Simpson panels on each side of x_p."""
    parts = [poor_axis(x_p, nodes, bound, breaks)]
    if x_p < bound:
        parts.append(_segment(x_p, bound, nodes, False))
    return concat_axes(parts)


def comonotone_axis(x_splits: Sequence[float], nodes: int, bound: float,
                    breaks: Iterable[float] = ()) -> List[ScoreAxis]:
    """
    One shared grid on [-B, B] split at every x_p (and at `breaks`);
    returns one axis per split value whose poor flags follow that split.
    """
    cuts = [float(np.clip(x, -bound, bound)) for x in x_splits]
    pieces = _pieces(-bound, bound, [*cuts, *breaks])
    return [concat_axes([_segment(a, b, nodes, b <= x_p) for a, b in pieces]) for x_p in cuts]


def gaussian_weight_matrix(a: ScoreAxis, b: ScoreAxis, rho: float) -> np.ndarray:
    """w_i w_j phi_2(x_i, y_j; rho) for the product grid a x b."""
    one_minus = 1.0 - rho * rho
    xa = a.x[:, None]
    xb = b.x[None, :]
    quad_form = (xa * xa - 2.0 * rho * xa * xb + xb * xb) / (2.0 * one_minus)
    density = np.exp(-quad_form) / (2.0 * np.pi * np.sqrt(one_minus))
    return a.weights[:, None] * density * b.weights[None, :]


def cumulative_tail(values: np.ndarray, axis: ScoreAxis) -> np.ndarray:
    """int_x^{end} values * phi dx at every node of a contiguous axis."""
    tail = np.empty(axis.size)
    carried = 0.0
    for start, stop in reversed(axis.bounds):
        x = axis.x[start:stop]
        running = integrate.cumulative_simpson(values[start:stop] * axis.density[start:stop],
                                               x=x, initial=0.0)
        tail[start:stop] = carried + running[-1] - running
        carried += running[-1]
    return tail


def refine(nodes: int) -> int:
    """Next grid size: halve the spacing."""
    return 2 * nodes - 1


def converged(old: np.ndarray, new: np.ndarray, rtol: float, scale: float) -> bool:
    floor = max(scale, 1e-12)
    return bool(np.all(np.abs(np.asarray(new) - np.asarray(old)) <= rtol * np.maximum(np.abs(new), floor)))
