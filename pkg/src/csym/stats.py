from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .groups import FiniteAbelianGroup
from .rng import SeedSpec

SIGMAS = 4.0


@dataclass(frozen=True)
class MomentEstimate:
    mean: float
    stderr: float
    trials: int
    seed: SeedSpec
    target_group: FiniteAbelianGroup | None = None
    model: Any = None
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_samples(cls, values, seed: SeedSpec, **kw) -> MomentEstimate:
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            raise ValueError("at least one trial is required")
        sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
        return cls(float(v.mean()), sd / math.sqrt(v.size), int(v.size), seed, **kw)

    def within(self, target: float, sigmas: float = SIGMAS, slack: float = 0.0) -> bool:
        return abs(self.mean - target) <= sigmas * self.stderr + slack

    def to_json(self) -> dict:
        out = {
            "mean": self.mean,
            "stderr": self.stderr,
            "trials": self.trials,
            "seed": self.seed.base_seed,
            "stream_index": self.seed.stream_index,
        }
        if self.target_group is not None:
            out["group"] = str(self.target_group)
        if self.model is not None and hasattr(self.model, "describe"):
            out["model"] = self.model.describe()
        out.update(self.extra)
        return out


def binomial_stderr(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / trials)
