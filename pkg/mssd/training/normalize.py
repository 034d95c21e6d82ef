"""
Per-variable z-normalization with training-split statistics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, List

import numpy as np

from mssd.core.errors import ContractViolation

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def from_values(cls, values: np.ndarray) -> "NormStats":
        """Statistics of ``values`` shaped ``[length]`` or ``[length, variables]``."""
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] < 1:
            raise ContractViolation("NormStats need at least one training value")
        mean = values.mean(axis=0)
        std = np.maximum(values.std(axis=0), STD_FLOOR)
        return cls(mean=mean, std=std)

    @property
    def n_variables(self) -> int:
        return int(self.mean.size)

    def select(self, variable: int) -> "NormStats":
        return NormStats(mean=self.mean[variable:variable + 1].copy(), std=self.std[variable:variable + 1].copy())

    def normalize(self, values: np.ndarray, variable: int = 0) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean[variable]) / self.std[variable]

    def denormalize(self, values: np.ndarray, variable: int = 0) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std[variable] + self.mean[variable]

    def to_dict(self) -> Dict[str, List[float]]:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "NormStats":
        return cls(
            mean=np.asarray(payload["mean"], dtype=np.float64),
            std=np.asarray(payload["std"], dtype=np.float64),
        )
