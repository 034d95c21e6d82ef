"""
SeriesFrame: a loaded dataset.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from mssd.core.errors import IngestionError


@dataclass(frozen=True)
class SeriesFrame:
    """Values ``[length, variables]`` sampled ``samples_per_hour`` times per hour.

    ``timestamps`` is optional; when present it must be strictly increasing
    with a constant spacing of ``1 / samples_per_hour`` hours. ``phase_offset``
    is the in-day position of row 0 for frames without timestamps.
    """
    name: str
    values: np.ndarray
    samples_per_hour: int = 1
    variable_names: List[str] = field(default_factory=list)
    timestamps: Optional[np.ndarray] = None
    phase_offset: int = 0

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise IngestionError(f"frame values must be [length, variables], got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            row, col = np.argwhere(~np.isfinite(values))[0]
            raise IngestionError("frame contains missing or non-finite values", row=int(row), column=str(col))
        if self.samples_per_hour < 1:
            raise IngestionError(f"samples_per_hour must be >= 1, got {self.samples_per_hour}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

        names = list(self.variable_names) or [f"var{v}" for v in range(values.shape[1])]
        if len(names) != values.shape[1]:
            raise IngestionError(f"{len(names)} variable names for {values.shape[1]} columns")
        object.__setattr__(self, "variable_names", names)

        if self.timestamps is not None:
            stamps = np.asarray(self.timestamps, dtype="datetime64[ns]")
            if stamps.shape != (values.shape[0],):
                raise IngestionError(f"{stamps.size} timestamps for {values.shape[0]} rows")
            check_spacing(stamps, self.samples_per_hour)
            stamps.flags.writeable = False
            object.__setattr__(self, "timestamps", stamps)

    @property
    def period_T(self) -> int:
        return 24 * self.samples_per_hour

    @property
    def n_variables(self) -> int:
        return int(self.values.shape[1])

    def __len__(self) -> int:
        return int(self.values.shape[0])

    def column(self, variable: int = 0) -> np.ndarray:
        return self.values[:, variable]

    def phase_origin(self) -> int:
        """In-day position of the first sample."""
        if self.timestamps is None:
            return int(self.phase_offset) % self.period_T
        first = pd.Timestamp(self.timestamps[0])
        since_midnight = first - first.normalize()
        step = pd.Timedelta(hours=1) / self.samples_per_hour
        return int(since_midnight // step) % self.period_T

    def with_values(self, values: np.ndarray, name: Optional[str] = None) -> "SeriesFrame":
        return replace(self, values=values, name=name or self.name)

    def select(self, variables: Sequence[int]) -> "SeriesFrame":
        return replace(
            self,
            values=self.values[:, list(variables)],
            variable_names=[self.variable_names[v] for v in variables],
        )

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.values.tobytes())
        digest.update("\x1f".join(self.variable_names).encode())
        digest.update(str(self.samples_per_hour).encode())
        if self.timestamps is not None:
            digest.update(self.timestamps.tobytes())
        return digest.hexdigest()

    def to_dataframe(self) -> pd.DataFrame:
        df = pd.DataFrame(self.values, columns=self.variable_names)
        if self.timestamps is not None:
            df.insert(0, "timestamp", pd.to_datetime(self.timestamps))
        return df


def check_spacing(stamps: np.ndarray, samples_per_hour: int) -> None:
    """Raise ``IngestionError`` naming the first row that breaks regular spacing."""
    if stamps.size < 2:
        return
    expected = np.timedelta64(3_600_000_000_000 // samples_per_hour, "ns")
    deltas = np.diff(stamps)
    bad = np.flatnonzero(deltas != expected)
    if bad.size:
        row = int(bad[0]) + 1
        kind = "duplicate" if deltas[bad[0]] == np.timedelta64(0, "ns") else "irregular"
        raise IngestionError(
            f"{kind} timestamp at row {row}: spacing {deltas[bad[0]]} != {expected}", row=row, column="timestamp"
        )
