"""
Index specifications: which weighted mean loss statistic to compute.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from ..errors import InvalidIndexSpec
from .cost import CostFunction, fgt_cost
from .weights import WeightScheme


class IndexKind(str, Enum):
    GENERAL = "general"
    KAKWANI = "kakwani"
    SEN = "sen"
    SHORROCKS = "shorrocks"
    THON = "thon"
    FGT = "fgt"


@dataclass(frozen=True)
class IndexSpec:
    """
    Index kind, its parameter and the cost function.

    FGT fixes d(u) = u**alpha; the other kinds default to d(u) = u.
    General specs carry a WeightScheme and may carry LimitFunctions for the
    asymptotic machinery (`limit`).
    """
    kind: IndexKind
    cost: CostFunction = field(default_factory=CostFunction.identity)
    k: Optional[int] = None
    alpha: Optional[float] = None
    scheme: Optional[WeightScheme] = None
    limit: Optional[Any] = field(default=None, compare=False)

    def __post_init__(self):
        kind = IndexKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (IndexKind.KAKWANI, IndexKind.SEN):
            k = 1 if kind is IndexKind.SEN else self.k
            if k is None or int(k) != k or k < 1:
                raise InvalidIndexSpec(f"Kakwani parameter k must be an integer >= 1, got {k}")
            object.__setattr__(self, "k", int(k))
        if kind is IndexKind.FGT:
            if self.alpha is None or self.alpha < 0:
                raise InvalidIndexSpec(f"FGT exponent alpha must be >= 0, got {self.alpha}")
        if kind is IndexKind.GENERAL and self.scheme is None:
            raise InvalidIndexSpec("general index needs a WeightScheme")

    @classmethod
    def kakwani(cls, k: int, cost: Optional[CostFunction] = None) -> "IndexSpec":
        return cls(IndexKind.KAKWANI, cost or CostFunction.identity(), k=k)

    @classmethod
    def sen(cls, cost: Optional[CostFunction] = None) -> "IndexSpec":
        return cls(IndexKind.SEN, cost or CostFunction.identity(), k=1)

    @classmethod
    def shorrocks(cls, cost: Optional[CostFunction] = None) -> "IndexSpec":
        return cls(IndexKind.SHORROCKS, cost or CostFunction.identity())

    @classmethod
    def thon(cls, cost: Optional[CostFunction] = None) -> "IndexSpec":
        return cls(IndexKind.THON, cost or CostFunction.identity())

    @classmethod
    def fgt(cls, alpha: float) -> "IndexSpec":
        if alpha is None or alpha < 0:
            raise InvalidIndexSpec(f"FGT exponent alpha must be >= 0, got {alpha}")
        return cls(IndexKind.FGT, fgt_cost(alpha), alpha=float(alpha))

    @classmethod
    def general(cls, scheme: WeightScheme, cost: Optional[CostFunction] = None,
                limit: Optional[Any] = None) -> "IndexSpec":
        return cls(IndexKind.GENERAL, cost or CostFunction.identity(), scheme=scheme, limit=limit)

    @property
    def label(self) -> str:
        if self.kind in (IndexKind.KAKWANI, IndexKind.SEN):
            base = f"{self.kind.value}({self.k})" if self.kind is IndexKind.KAKWANI else "sen"
        elif self.kind is IndexKind.FGT:
            return f"fgt({self.alpha:g})"
        elif self.kind is IndexKind.GENERAL:
            base = f"general[{self.scheme.name}]"
        else:
            base = self.kind.value
        return base if self.cost.name == "identity" else f"{base}/{self.cost.name}"

    @property
    def effective_k(self) -> Optional[int]:
        return self.k if self.kind in (IndexKind.KAKWANI, IndexKind.SEN) else None

    def evaluate(self, section, z: float) -> float:
        from .core import evaluate_index

        return evaluate_index(section, z, self)
