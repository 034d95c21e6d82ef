"""
Optimization loop, early stopping, inference and channel-independent fitting.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator

from mssd.core.errors import ContractViolation, DimensionError, TrainingDivergedError
from mssd.models.mssd import MssdConfig, MssdModel
from mssd.numcore import Adam, GradTape, Tensor, backward, mse_loss
from mssd.training.normalize import NormStats
from mssd.training.windows import (
    DEFAULT_SPLIT,
    IndexRange,
    WindowSpec,
    check_fractions,
    chronological_split,
    window_arrays,
)
from mssd.utils.training_log import TrainingLog

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    epochs: int = Field(100, ge=1)
    batch_size: int = Field(32, ge=1)
    lr: float = Field(1e-3, ge=0.0)
    patience: int = Field(10, ge=0, description="Epochs without validation improvement before stopping")
    seed: int = 42
    split_fractions: Tuple[float, float, float] = DEFAULT_SPLIT

    @field_validator("split_fractions")
    @classmethod
    def _valid_fractions(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        return check_fractions(value)


@dataclass
class DatasetSplits:
    """Training and validation values of one variable.

    Only the train and val rows are copied in; the test range is kept as
    indices so fitting cannot see test values.
    """
    train: np.ndarray
    val: np.ndarray
    train_range: IndexRange
    val_range: IndexRange
    test_range: IndexRange
    period_T: int = 24
    phase_origin: int = 0
    norm_stats: NormStats = field(init=False)

    def __post_init__(self) -> None:
        self.train = np.asarray(self.train, dtype=np.float64)
        self.val = np.asarray(self.val, dtype=np.float64)
        self.norm_stats = NormStats.from_values(self.train)


def prepare_splits(
    series: np.ndarray,
    spec: WindowSpec,
    fractions: Sequence[float] = DEFAULT_SPLIT,
    period_T: int = 24,
    phase_origin: int = 0,
) -> DatasetSplits:
    """Split one variable chronologically, reading only its train and val rows."""
    if np.ndim(series) != 1:
        raise DimensionError(f"prepare_splits expects one variable, got {np.ndim(series)} dimensions")
    train, val, test = chronological_split(len(series), fractions, spec)
    return DatasetSplits(
        train=np.array(series[train.slice()], dtype=np.float64),
        val=np.array(series[val.slice()], dtype=np.float64),
        train_range=train,
        val_range=val,
        test_range=test,
        period_T=period_T,
        phase_origin=phase_origin,
    )


@dataclass
class FitResult:
    model: MssdModel
    records: List[Dict[str, float]]
    best_epoch: int
    best_val_mse: float
    stopped_early: bool = False


def _forward_batches(model: MssdModel, inputs: np.ndarray, offsets: np.ndarray, batch_size: int) -> np.ndarray:
    outputs = [
        model(inputs[i:i + batch_size], offsets[i:i + batch_size]).numpy()
        for i in range(0, inputs.shape[0], batch_size)
    ]
    return np.concatenate(outputs, axis=0)


def fit(
    model: MssdModel,
    splits: DatasetSplits,
    config: TrainConfig,
    log: Optional[TrainingLog] = None,
    variable: Optional[str] = None,
) -> FitResult:
    """Train ``model`` on normalized train windows with Adam.

    After every epoch the validation MSE is measured; the parameters of the
    best epoch are restored on return. Training stops once ``patience``
    consecutive epochs fail to improve it.

    Raises:
        TrainingDivergedError: If a batch loss is NaN or infinite.
    """
    stats = splits.norm_stats
    model.norm_stats = stats
    spec = WindowSpec(input_len=model.input_len, horizon=model.horizon)
    train_x, train_y, train_off = window_arrays(
        stats.normalize(splits.train), spec, splits.period_T, splits.train_range.start, splits.phase_origin
    )
    val_x, val_y, val_off = window_arrays(
        stats.normalize(splits.val), spec, splits.period_T, splits.val_range.start, splits.phase_origin
    )
    if train_x.shape[0] == 0 or val_x.shape[0] == 0:
        raise ContractViolation(
            f"fit needs at least one train and one val window of {spec.span} rows",
            {"train_rows": int(splits.train.size), "val_rows": int(splits.val.size)},
        )

    rng = np.random.default_rng(config.seed)
    optimizer = Adam(model, lr=config.lr)
    records: List[Dict[str, float]] = []
    best_val = np.inf
    best_epoch = 0
    best_state = model.state_dict()
    bad_epochs = 0
    stopped_early = False
    label = f"[{variable}] " if variable is not None else ""

    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        model.train()
        order = rng.permutation(train_x.shape[0])
        total = 0.0
        for batch_index, begin in enumerate(range(0, order.size, config.batch_size)):
            idx = order[begin:begin + config.batch_size]
            with GradTape() as tape:
                loss = mse_loss(model(train_x[idx], train_off[idx]), Tensor(train_y[idx]))
                value = loss.item()
                if not np.isfinite(value):
                    logger.error(f"{label}Loss diverged at epoch {epoch}, batch {batch_index}: {value}")
                    raise TrainingDivergedError(
                        f"non-finite loss {value} at epoch {epoch}, batch {batch_index}", epoch, batch_index
                    )
                grads = backward(loss, tape)
            optimizer.step(grads)
            total += value * idx.size
        train_mse = total / order.size

        model.eval()
        val_pred = _forward_batches(model, val_x, val_off, config.batch_size)
        val_mse = float(np.mean((val_pred - val_y) ** 2))
        wall_ms = (time.perf_counter() - started) * 1000.0
        record = {"epoch": epoch, "train_mse": train_mse, "val_mse": val_mse, "wall_ms": wall_ms}
        records.append(record)
        if log is not None:
            log.log_epoch(epoch, train_mse, val_mse, wall_ms, variable=variable)
        logger.info(f"{label}Epoch {epoch}: train_mse={train_mse:.6f} val_mse={val_mse:.6f} ({wall_ms:.0f} ms)")

        if val_mse < best_val:
            best_val, best_epoch, bad_epochs = val_mse, epoch, 0
            best_state = model.state_dict()
        else:
            bad_epochs += 1
            if bad_epochs >= max(config.patience, 1):
                logger.info(f"{label}Early stopping after epoch {epoch} ({bad_epochs} epochs without improvement)")
                stopped_early = True
                break

    model.load_state_dict(best_state)
    model.eval()
    logger.info(f"{label}Restored parameters of epoch {best_epoch} (val_mse={best_val:.6f})")
    return FitResult(
        model=model, records=records, best_epoch=best_epoch, best_val_mse=float(best_val), stopped_early=stopped_early
    )


def predict(
    model: MssdModel,
    window: Union[np.ndarray, Sequence[float]],
    start_offset: Union[int, Sequence[int]] = 0,
) -> np.ndarray:
    """Forecast in original units from a raw input window (or a batch of them)."""
    if model.norm_stats is None:
        raise ContractViolation("predict needs a model with normalization statistics")
    window = np.asarray(window, dtype=np.float64)
    if window.shape[-1] != model.input_len:
        raise ContractViolation(f"window must have {model.input_len} values, got {window.shape[-1]}")
    model.eval()
    normalized = model.norm_stats.normalize(window)
    return model.norm_stats.denormalize(model(normalized, start_offset).numpy())


def fit_channel_independent(
    values: np.ndarray,
    model_config: MssdConfig,
    config: TrainConfig,
    variable_names: Optional[Sequence[str]] = None,
    phase_origin: int = 0,
    jobs: int = 1,
    log: Optional[TrainingLog] = None,
) -> List[FitResult]:
    """One independently trained model per column of ``values`` ``[length, variables]``.

    Lanes run on a thread pool of ``jobs`` workers; each builds its own model
    from ``model_config``, so results do not depend on ``jobs``.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    names = list(variable_names) if variable_names is not None else [f"var{v}" for v in range(values.shape[1])]
    if len(names) != values.shape[1]:
        raise DimensionError(f"{len(names)} variable names for {values.shape[1]} columns")
    spec = WindowSpec(input_len=model_config.input_len, horizon=model_config.horizon)
    period = 24 * model_config.samples_per_hour

    def _lane(column: int) -> FitResult:
        splits = prepare_splits(values[:, column], spec, config.split_fractions, period, phase_origin)
        return fit(MssdModel(model_config), splits, config, log=log, variable=names[column])

    logger.info(f"Fitting {len(names)} channel-independent models on {max(jobs, 1)} lane(s)")
    if jobs <= 1 or len(names) == 1:
        return [_lane(column) for column in range(len(names))]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_lane, range(len(names))))
