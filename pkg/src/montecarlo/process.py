"""
Panel simulation from a distribution model with reproducible random streams.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from ..asymptotics.models import DistributionModel
from ..errors import ConfigError
from ..panel.dataset import PanelDataset

logger = logging.getLogger("monte_carlo")


@dataclass(frozen=True)
class ProcessModel:
    """
    A DistributionModel plus a seed.

    Replication r draws from its own stream SeedSequence(seed, spawn_key=(r,)),
    so a replication does not depend on which worker runs it or in what order.
    """
    model: DistributionModel
    seed: int
    name: str = field(default="process", compare=False)

    def __post_init__(self):
        if self.seed is None or int(self.seed) < 0:
            raise ConfigError(f"simulation needs an explicit non-negative seed, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))

    def rng(self, r: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(int(r),)))

    def sample(self, n: int, r: int) -> np.ndarray:
        """(n, m) outcomes of replication r."""
        if n < 1:
            raise ConfigError(f"sample size must be >= 1, got {n}")
        return self.model.sample(self.rng(r), n)

    @property
    def times(self):
        return self.model.times

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "seed": self.seed, "model": self.model.to_dict()}


def simulate_panel(process: ProcessModel, n: int, r: int = 0, source: Optional[str] = None) -> PanelDataset:
    """n i.i.d. trajectories from replication r."""
    values = process.sample(n, r)
    ids = tuple(f"i{j + 1}" for j in range(n))
    panel = PanelDataset(ids=ids, times=np.asarray(process.times), values=values,
                         source=source or f"{process.name}[seed={process.seed}, r={r}]")
    logger.debug(f"Simulated panel n={n}, m={panel.m}, r={r}")
    return panel
