"""
Rank weight schemes for the general weighted mean loss statistic.
"""

import threading
from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np

from ..errors import DegenerateWeights, InvalidIndexSpec, InvalidWeightIndex


@dataclass(frozen=True)
class WeightScheme:
    """
    Weights w, coefficients mu1..mu4 and scale A(n, Q).

    The j-th poorest observation gets w(mu1*n + mu2*Q - mu3*j + mu4) and the
    sum is normalized by A(n, Q) / (n * B(Q)) with B(Q) = w(1) + ... + w(Q).
    """
    name: str
    w: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    mu: Tuple[int, int, int, int] = (0, 1, 1, 1)
    scale: Callable[[int, int], float] = field(default=lambda n, q: float(q), repr=False, compare=False)
    _prefix: list = field(default_factory=lambda: [np.zeros(1)], init=False, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.mu) != 4 or any(int(m) != m for m in self.mu):
            raise InvalidIndexSpec(f"mu must be four integers, got {self.mu}")
        object.__setattr__(self, "mu", tuple(int(m) for m in self.mu))

    def weights(self, args: np.ndarray) -> np.ndarray:
        values = np.asarray(self.w(np.asarray(args, dtype=np.int64)), dtype=float)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidIndexSpec(f"weights of '{self.name}' must be finite and >= 0")
        return values

    def arguments(self, n: int, q: int) -> np.ndarray:
        """Weight arguments for j = 1..q."""
        mu1, mu2, mu3, mu4 = self.mu
        j = np.arange(1, q + 1, dtype=np.int64)
        args = mu1 * n + mu2 * q - mu3 * j + mu4
        if np.any(args <= 0):
            bad = int(j[np.argmax(args <= 0)])
            raise InvalidWeightIndex(
                f"weight argument {mu1}*{n} + {mu2}*{q} - {mu3}*{bad} + {mu4} is not positive"
            )
        return args

    def prefix_sum(self, q: int) -> float:
        """B(Q) from a cached running sum of w(1..Q)."""
        prefix = self._prefix[0]
        if q >= prefix.size:
            with self._lock:
                prefix = self._prefix[0]
                if q >= prefix.size:
                    size = max(q + 1, 2 * prefix.size)
                    prefix = np.concatenate(([0.0], np.cumsum(self.weights(np.arange(1, size)))))
                    self._prefix[0] = prefix
        total = float(prefix[q])
        if q >= 1 and total == 0.0:
            raise DegenerateWeights(f"B({q}) = 0 for weight scheme '{self.name}'")
        return total

    @classmethod
    def kakwani(cls, k: int) -> "WeightScheme":
        """w(j) = j**k, A = Q, mu = (0, 1, 1, 1)."""
        return cls(f"kakwani({k})", lambda j: np.power(j.astype(float), k), (0, 1, 1, 1))

    @classmethod
    def unit(cls) -> "WeightScheme":
        """w = 1, A = Q: the plain mean over the whole sample."""
        return cls("unit", lambda j: np.ones(j.shape, dtype=float), (0, 0, 0, 1))
