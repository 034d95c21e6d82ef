"""Forecast error metrics."""

from typing import Sequence, Union

import numpy as np

from mssd.core.errors import DimensionError

ArrayLike = Union[np.ndarray, Sequence[float]]


def _pair(pred: ArrayLike, target: ArrayLike):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} does not match target shape {target.shape}")
    if pred.size == 0:
        raise DimensionError("metrics need at least one value")
    return pred, target


def mse(pred: ArrayLike, target: ArrayLike) -> float:
    """Mean squared error over all positions and windows."""
    pred, target = _pair(pred, target)
    return float(np.mean((pred - target) ** 2))


def mae(pred: ArrayLike, target: ArrayLike) -> float:
    """Mean absolute error over all positions and windows."""
    pred, target = _pair(pred, target)
    return float(np.mean(np.abs(pred - target)))
