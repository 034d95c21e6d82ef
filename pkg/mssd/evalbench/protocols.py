"""
Benchmark protocols: test-split evaluation, channel-independent
multivariate evaluation, robustness to training noise, input-length sweeps
and ablations.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from mssd.core.errors import ConfigurationError, ContractViolation, DimensionError
from mssd.data.frame import SeriesFrame
from mssd.evalbench.metrics import mae, mse
from mssd.models.mssd import MssdConfig, MssdModel
from mssd.models.sdnet import SDNetConfig
from mssd.numcore import AllocationTracker, Tensor
from mssd.training.normalize import NormStats
from mssd.training.trainer import DatasetSplits, TrainConfig, fit, prepare_splits
from mssd.training.windows import DEFAULT_SPLIT, WindowSpec, chronological_split, window_arrays
from mssd.utils.training_log import TrainingLog

logger = logging.getLogger(__name__)


class Forecaster(Protocol):
    input_len: int
    horizon: int
    norm_stats: Optional[NormStats]

    def __call__(self, window: np.ndarray, start_offset: Union[int, Sequence[int]]) -> Union[Tensor, np.ndarray]:
        ...


class EvalReport(BaseModel):
    dataset: str
    horizon: int = Field(..., ge=1)
    input_len: int = Field(..., ge=1)
    mse: float = Field(..., ge=0.0)
    mae: float = Field(..., ge=0.0)
    n_windows: int = Field(..., ge=1)
    wall_ms: float = Field(0.0, ge=0.0)
    peak_mem_bytes: int = Field(0, ge=0)
    variant: str = "mssd"
    n_variables: int = Field(1, ge=1)


class AblationSwitches(BaseModel):
    causal_conv: bool = Field(True, description="Off: plain same-padded conv1d instead of the dilated causal stack")
    global_block: bool = Field(True, description="Off: drop the 2-D global block")
    attention_reference: bool = Field(False, description="Time a naive self-attention layer alongside")

    def apply(self, config: SDNetConfig) -> SDNetConfig:
        return config.model_copy(update={"causal_conv": self.causal_conv, "global_block": self.global_block})

    @property
    def is_default(self) -> bool:
        return self.causal_conv and self.global_block

    @property
    def label(self) -> str:
        parts = [name for name in ("causal_conv", "global_block") if not getattr(self, name)]
        return "no_" + "_no_".join(parts) if parts else "default"


class NoiseSpec(BaseModel):
    ratio: float = Field(0.0, ge=0.0, lt=1.0, description="Fraction of training positions perturbed")
    mode: str = Field("additive-gaussian", pattern=r"^additive-gaussian$")
    sigma_scale: float = Field(1.0, ge=0.0, description="Noise std as a fraction of the training std")


def _as_array(output: Union[Tensor, np.ndarray]) -> np.ndarray:
    return output.numpy() if isinstance(output, Tensor) else np.asarray(output, dtype=np.float64)


def evaluate(
    model: Forecaster,
    frame: SeriesFrame,
    spec: Optional[WindowSpec] = None,
    fractions: Sequence[float] = DEFAULT_SPLIT,
    variable: int = 0,
    metric_stats: Optional[NormStats] = None,
    batch_size: int = 256,
    variant: str = "mssd",
) -> EvalReport:
    """Score ``model`` on every test window of one variable.

    Errors are measured on the normalized scale of ``metric_stats``, which
    defaults to the model's own training statistics.
    """
    spec = spec or WindowSpec(input_len=model.input_len, horizon=model.horizon)
    if (spec.input_len, spec.horizon) != (model.input_len, model.horizon):
        raise DimensionError(
            f"window spec I={spec.input_len} O={spec.horizon} does not match model "
            f"I={model.input_len} O={model.horizon}"
        )
    stats = model.norm_stats
    if stats is None:
        raise ContractViolation("evaluate needs a model with normalization statistics")
    _, _, test = chronological_split(len(frame), fractions, spec)
    raw = frame.column(variable)[test.slice()]
    inputs, targets, offsets = window_arrays(
        stats.normalize(raw), spec, frame.period_T, test.start, frame.phase_origin()
    )
    if hasattr(model, "eval"):
        model.eval()

    with AllocationTracker() as tracker:
        started = time.perf_counter()
        pred = np.concatenate(
            [
                _as_array(model(inputs[i:i + batch_size], offsets[i:i + batch_size]))
                for i in range(0, inputs.shape[0], batch_size)
            ],
            axis=0,
        )
        wall_ms = (time.perf_counter() - started) * 1000.0

    if metric_stats is not None and metric_stats is not stats:
        pred = metric_stats.normalize(stats.denormalize(pred))
        targets = metric_stats.normalize(stats.denormalize(targets))

    report = EvalReport(
        dataset=frame.name,
        horizon=spec.horizon,
        input_len=spec.input_len,
        mse=mse(pred, targets),
        mae=mae(pred, targets),
        n_windows=inputs.shape[0],
        wall_ms=wall_ms,
        peak_mem_bytes=tracker.allocated_bytes,
        variant=variant,
    )
    logger.info(
        f"{frame.name} I={spec.input_len} O={spec.horizon} [{variant}]: "
        f"mse={report.mse:.4f} mae={report.mae:.4f} over {report.n_windows} windows"
    )
    return report


def evaluate_multivariate(
    models: Sequence[Forecaster],
    frame: SeriesFrame,
    spec: Optional[WindowSpec] = None,
    fractions: Sequence[float] = DEFAULT_SPLIT,
    variant: str = "mssd",
) -> EvalReport:
    """Channel-independent evaluation: one model per variable, metrics averaged."""
    if len(models) != frame.n_variables:
        raise DimensionError(f"{len(models)} models for {frame.n_variables} variables")
    reports = [
        evaluate(model, frame, spec, fractions, variable=v, variant=variant) for v, model in enumerate(models)
    ]
    first = reports[0]
    return EvalReport(
        dataset=frame.name,
        horizon=first.horizon,
        input_len=first.input_len,
        mse=float(np.mean([r.mse for r in reports])),
        mae=float(np.mean([r.mae for r in reports])),
        n_windows=first.n_windows,
        wall_ms=float(sum(r.wall_ms for r in reports)),
        peak_mem_bytes=max(r.peak_mem_bytes for r in reports),
        variant=variant,
        n_variables=frame.n_variables,
    )


def inject_noise(
    values: np.ndarray,
    noise: NoiseSpec,
    rng: np.random.Generator,
    reference_std: Optional[float] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Perturb ``round(ratio * n)`` distinct positions with gaussian noise.

    Returns the perturbed copy and the boolean mask of touched positions.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    count = int(round(noise.ratio * n))
    mask = np.zeros(n, dtype=bool)
    mask[rng.choice(n, size=count, replace=False)] = True
    sigma = noise.sigma_scale * (reference_std if reference_std is not None else float(values.std()))
    noisy = values.copy()
    noisy[mask] += rng.normal(0.0, sigma, size=count)
    return noisy, mask


def _train_and_evaluate(
    model: MssdModel,
    splits: DatasetSplits,
    frame: SeriesFrame,
    train_config: TrainConfig,
    variable: int,
    metric_stats: Optional[NormStats] = None,
    log: Optional[TrainingLog] = None,
    variant: str = "mssd",
) -> EvalReport:
    fit(model, splits, train_config, log=log, variable=frame.variable_names[variable])
    return evaluate(
        model, frame, None, train_config.split_fractions, variable, metric_stats=metric_stats, variant=variant
    )


def robustness_sweep(
    model_factory: Callable[[], MssdModel],
    frame: SeriesFrame,
    ratios: Sequence[float],
    train_config: Optional[TrainConfig] = None,
    sigma_scale: float = 1.0,
    variable: int = 0,
    log: Optional[TrainingLog] = None,
) -> List[Tuple[float, EvalReport]]:
    """Retrain with noise on a growing fraction of training positions.

    Every model is scored on the clean test split, on the scale of the clean
    training statistics so that reports stay comparable across ratios.
    """
    if list(ratios) != sorted(ratios):
        raise ConfigurationError(f"noise ratios must be ascending, got {list(ratios)}")
    train_config = train_config or TrainConfig()
    results: List[Tuple[float, EvalReport]] = []
    for ratio in ratios:
        noise = NoiseSpec(ratio=ratio, sigma_scale=sigma_scale)
        model = model_factory()
        spec = WindowSpec(input_len=model.input_len, horizon=model.horizon)
        clean = prepare_splits(
            frame.column(variable), spec, train_config.split_fractions, frame.period_T, frame.phase_origin()
        )
        splits = clean
        if noise.ratio > 0:
            noisy, mask = inject_noise(
                clean.train, noise, np.random.default_rng(train_config.seed), float(clean.norm_stats.std[0])
            )
            logger.info(f"Perturbed {int(mask.sum())} of {mask.size} training positions (ratio={ratio})")
            splits = DatasetSplits(
                train=noisy,
                val=clean.val,
                train_range=clean.train_range,
                val_range=clean.val_range,
                test_range=clean.test_range,
                period_T=clean.period_T,
                phase_origin=clean.phase_origin,
            )
        report = _train_and_evaluate(
            model, splits, frame, train_config, variable, clean.norm_stats, log, variant=f"noise={ratio:g}"
        )
        results.append((float(ratio), report))
    return results


def input_length_sweep(
    frame: SeriesFrame,
    input_lens: Sequence[int],
    horizon: int,
    model_config: Optional[MssdConfig] = None,
    train_config: Optional[TrainConfig] = None,
    variable: int = 0,
    log: Optional[TrainingLog] = None,
) -> List[EvalReport]:
    """Train and score one model per input length at a fixed horizon."""
    base = (model_config or MssdConfig(samples_per_hour=frame.samples_per_hour)).model_dump()
    train_config = train_config or TrainConfig()
    period = frame.period_T
    for input_len in input_lens:
        if input_len < period or input_len % period:
            raise ConfigurationError(
                f"input length {input_len} must be a whole number of {period}-sample periods "
                "so every phase is observed"
            )
    reports = []
    for input_len in input_lens:
        config = MssdConfig.model_validate({**base, "input_len": input_len, "horizon": horizon})
        spec = WindowSpec(input_len=input_len, horizon=horizon)
        splits = prepare_splits(
            frame.column(variable), spec, train_config.split_fractions, period, frame.phase_origin()
        )
        reports.append(
            _train_and_evaluate(MssdModel(config), splits, frame, train_config, variable, log=log, variant=f"I={input_len}")
        )
    return reports


@dataclass
class AblationResult:
    horizon: int
    switches: AblationSwitches
    default: EvalReport
    variant: EvalReport
    default_parameters: int
    variant_parameters: int

    @property
    def parameter_delta(self) -> int:
        return self.variant_parameters - self.default_parameters


def ablation_run(
    frame: SeriesFrame,
    switches: AblationSwitches,
    spec: WindowSpec,
    model_config: Optional[MssdConfig] = None,
    train_config: Optional[TrainConfig] = None,
    variable: int = 0,
    log: Optional[TrainingLog] = None,
) -> AblationResult:
    """Train the default model and the switched variant on identical data and seeds."""
    base = model_config or MssdConfig(samples_per_hour=frame.samples_per_hour)
    base = base.model_copy(update={"input_len": spec.input_len, "horizon": spec.horizon})
    base = MssdConfig.model_validate(base.model_dump())
    default_config = base.model_copy(update={"sdnet": AblationSwitches().apply(base.sdnet)})
    variant_config = base.model_copy(update={"sdnet": switches.apply(base.sdnet)})
    train_config = train_config or TrainConfig()
    splits = prepare_splits(
        frame.column(variable), spec, train_config.split_fractions, frame.period_T, frame.phase_origin()
    )

    reports = []
    sizes = []
    for label, config in (("default", default_config), (switches.label, variant_config)):
        model = MssdModel(config)
        sizes.append(model.num_parameters())
        reports.append(_train_and_evaluate(model, splits, frame, train_config, variable, log=log, variant=label))
    return AblationResult(
        horizon=spec.horizon,
        switches=switches,
        default=reports[0],
        variant=reports[1],
        default_parameters=sizes[0],
        variant_parameters=sizes[1],
    )


def ablation_study(
    frame: SeriesFrame,
    switches: AblationSwitches,
    horizons: Sequence[int],
    input_len: int,
    model_config: Optional[MssdConfig] = None,
    train_config: Optional[TrainConfig] = None,
    variable: int = 0,
    log: Optional[TrainingLog] = None,
) -> List[AblationResult]:
    """Paired default/variant results for every horizon."""
    return [
        ablation_run(
            frame, switches, WindowSpec(input_len=input_len, horizon=horizon), model_config, train_config, variable, log
        )
        for horizon in horizons
    ]
