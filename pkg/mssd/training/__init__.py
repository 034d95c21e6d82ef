"""Windowing, normalization and the training loop."""

from mssd.training.normalize import NormStats
from mssd.training.trainer import (
    DatasetSplits,
    FitResult,
    TrainConfig,
    fit,
    fit_channel_independent,
    predict,
    prepare_splits,
)
from mssd.training.windows import (
    DEFAULT_SPLIT,
    IndexRange,
    Window,
    WindowSpec,
    chronological_split,
    count_windows,
    make_windows,
    window_arrays,
)

__all__ = [
    "DEFAULT_SPLIT",
    "DatasetSplits",
    "FitResult",
    "IndexRange",
    "NormStats",
    "TrainConfig",
    "Window",
    "WindowSpec",
    "chronological_split",
    "count_windows",
    "fit",
    "fit_channel_independent",
    "make_windows",
    "predict",
    "prepare_splits",
]
