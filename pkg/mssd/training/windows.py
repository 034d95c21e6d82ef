"""
Chronological splits and sliding windows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, Field

from mssd.core.errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_SPLIT = (0.7, 0.1, 0.2)


class WindowSpec(BaseModel):
    input_len: int = Field(96, ge=1, description="Input length I")
    horizon: int = Field(24, ge=1, description="Prediction length O")
    stride: int = Field(1, ge=1)

    @property
    def span(self) -> int:
        return self.input_len + self.horizon


@dataclass(frozen=True)
class IndexRange:
    """Half-open row range ``[start, stop)``."""
    start: int
    stop: int

    def __len__(self) -> int:
        return self.stop - self.start

    def slice(self) -> slice:
        return slice(self.start, self.stop)


@dataclass(frozen=True)
class Window:
    input: np.ndarray
    target: np.ndarray
    start_offset: int
    start: int


def check_fractions(fractions: Sequence[float]) -> Tuple[float, float, float]:
    if len(fractions) != 3:
        raise ConfigurationError(f"split fractions need (train, val, test), got {tuple(fractions)}")
    train, val, test = (float(f) for f in fractions)
    if min(train, val, test) <= 0.0:
        raise ConfigurationError(f"split fractions must all be positive, got {tuple(fractions)}")
    if abs(train + val + test - 1.0) > 1e-9:
        raise ConfigurationError(f"split fractions must sum to 1, got {train + val + test}")
    return train, val, test


def chronological_split(
    length: Union[int, Sequence],
    fractions: Sequence[float] = DEFAULT_SPLIT,
    spec: WindowSpec = None,
) -> Tuple[IndexRange, IndexRange, IndexRange]:
    """Cut ``length`` rows into ordered train/val/test ranges.

    Boundaries sit at ``round(n * train)`` and ``round(n * (train + val))``,
    so the test range is always the most recent segment. With ``spec`` given
    every range must hold at least one full window.
    """
    n = length if isinstance(length, int) else len(length)
    train_f, val_f, _ = check_fractions(fractions)
    train_end = int(round(n * train_f))
    val_end = int(round(n * (train_f + val_f)))
    ranges = (IndexRange(0, train_end), IndexRange(train_end, val_end), IndexRange(val_end, n))
    needed = spec.span if spec is not None else 1
    for name, rng in zip(("train", "val", "test"), ranges):
        if len(rng) < needed:
            raise ConfigurationError(
                f"series of length {n} is too short: {name} split has {len(rng)} rows, needs {needed}"
            )
    return ranges


def count_windows(length: int, spec: WindowSpec) -> int:
    if length < spec.span:
        return 0
    return (length - spec.span) // spec.stride + 1


def make_windows(
    series: np.ndarray,
    index_range: IndexRange,
    spec: WindowSpec,
    period_T: int = 24,
    phase_origin: int = 0,
) -> Iterator[Window]:
    """Sliding windows inside ``index_range`` of a univariate series.

    ``start_offset`` is the in-day position of the first input value, where
    row 0 of ``series`` sits at ``phase_origin``.
    """
    series = np.asarray(series, dtype=np.float64)
    for k in range(count_windows(len(index_range), spec)):
        start = index_range.start + k * spec.stride
        split = start + spec.input_len
        yield Window(
            input=series[start:split].copy(),
            target=series[split:split + spec.horizon].copy(),
            start_offset=(start + phase_origin) % period_T,
            start=start,
        )


def window_arrays(
    series: np.ndarray,
    spec: WindowSpec,
    period_T: int = 24,
    first_row: int = 0,
    phase_origin: int = 0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All windows of ``series`` stacked as ``(inputs [N, I], targets [N, O], offsets [N])``.

    ``first_row`` is the row index of ``series[0]`` in the full frame.
    """
    series = np.asarray(series, dtype=np.float64)
    count = count_windows(series.size, spec)
    if count == 0:
        empty = np.empty((0,), dtype=np.int64)
        return np.empty((0, spec.input_len)), np.empty((0, spec.horizon)), empty
    frames = sliding_window_view(series, spec.span)[::spec.stride][:count]
    starts = first_row + np.arange(count) * spec.stride
    offsets = (starts + phase_origin) % period_T
    return frames[:, :spec.input_len].copy(), frames[:, spec.input_len:].copy(), offsets.astype(np.int64)
