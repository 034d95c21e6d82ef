"""
Reference forecasters for the accuracy gates.

Both follow the same calling convention as ``MssdModel``: normalized
``[batch, input_len]`` windows and per-row start offsets in, normalized
``[batch, horizon]`` forecasts out.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence, Union

import numpy as np

from mssd.core.errors import ConfigurationError, DimensionError
from mssd.training.normalize import NormStats
from mssd.training.trainer import DatasetSplits
from mssd.training.windows import WindowSpec, window_arrays

logger = logging.getLogger(__name__)


class _Reference:
    def __init__(self, input_len: int, horizon: int, norm_stats: Optional[NormStats] = None):
        self.input_len = input_len
        self.horizon = horizon
        self.norm_stats = norm_stats

    def eval(self) -> "_Reference":
        return self

    def _check(self, window: np.ndarray) -> np.ndarray:
        window = np.asarray(window, dtype=np.float64)
        if window.shape[-1] != self.input_len:
            raise DimensionError(f"expected windows of length {self.input_len}, got {window.shape}")
        return window


class SeasonalNaive(_Reference):
    """Repeat the most recent full period across the horizon."""

    def __init__(self, input_len: int, horizon: int, period_T: int, norm_stats: Optional[NormStats] = None):
        if input_len < period_T:
            raise ConfigurationError(f"seasonal-naive needs one full period ({period_T}) of input, got {input_len}")
        super().__init__(input_len, horizon, norm_stats)
        self.period_T = period_T
        self._source = input_len - period_T + np.arange(horizon) % period_T

    def __call__(self, window: np.ndarray, start_offset: Union[int, Sequence[int]] = 0) -> np.ndarray:
        return self._check(window)[..., self._source]


class GlobalLinear(_Reference):
    """One affine map from the whole input window to the whole horizon."""

    def __init__(self, weight: np.ndarray, bias: np.ndarray, norm_stats: Optional[NormStats] = None):
        super().__init__(weight.shape[1], weight.shape[0], norm_stats)
        self.weight = weight
        self.bias = bias

    def __call__(self, window: np.ndarray, start_offset: Union[int, Sequence[int]] = 0) -> np.ndarray:
        return self._check(window) @ self.weight.T + self.bias


def fit_global_linear(splits: DatasetSplits, spec: WindowSpec, alpha: float = 1e-3) -> GlobalLinear:
    """Ridge least squares on the normalized training windows.

    The bias column is not penalized.
    """
    stats = splits.norm_stats
    inputs, targets, _ = window_arrays(stats.normalize(splits.train), spec, splits.period_T)
    if inputs.shape[0] == 0:
        raise ConfigurationError(f"no training windows of {spec.span} rows for the global linear baseline")
    design = np.hstack([inputs, np.ones((inputs.shape[0], 1))])
    penalty = alpha * np.eye(design.shape[1])
    penalty[-1, -1] = 0.0
    solution = np.linalg.solve(design.T @ design + penalty, design.T @ targets)
    logger.debug(f"Fitted global linear baseline on {inputs.shape[0]} windows (alpha={alpha})")
    return GlobalLinear(weight=solution[:-1].T.copy(), bias=solution[-1].copy(), norm_stats=stats)
