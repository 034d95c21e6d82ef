"""
Run configuration: one flat, commented YAML file per run.

Every key can be overridden by the CLI flag of the same name. Precedence is
CLI flag, then ``MSSD_SEED`` (seed only), then the file, then the defaults
below.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Annotated, Any, Dict, List, Mapping, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, Field, PositiveInt, ValidationError, field_validator

from mssd.core.errors import ConfigurationError
from mssd.models.mssd import MssdConfig
from mssd.models.sdnet import SDNetConfig
from mssd.training.trainer import TrainConfig
from mssd.training.windows import DEFAULT_SPLIT, WindowSpec, check_fractions

logger = logging.getLogger(__name__)

SDNET_KEYS = tuple(SDNetConfig.model_fields)

NoiseRatio = Annotated[float, Field(ge=0.0, lt=1.0)]


class RunConfig(BaseModel):
    # Data
    data: Optional[str] = Field(None, description="Input CSV path")
    samples_per_hour: Optional[int] = Field(None, ge=1, description="Samples per hour i; inferred from timestamps when empty")
    phase_offset: int = Field(0, ge=0, description="In-day position of row 0 for files without timestamps")
    fill_policy: str = Field("forward-fill", pattern=r"^(reject|forward-fill)$", description="Gap handling: reject | forward-fill")
    delimiter: str = Field(",", min_length=1, description="CSV field separator")

    # Model
    input_len: int = Field(96, ge=1, description="Input length I")
    horizon: int = Field(24, ge=1, description="Prediction length O")
    linear_init: str = Field("naive", pattern=r"^(naive|uniform|zeros)$", description="Linear predictor init: naive | uniform | zeros")
    num_heads: int = Field(2, ge=1, description="SDNet heads")
    kernel_scales: List[PositiveInt] = Field(default_factory=lambda: [2, 3], description="Local conv kernel=stride per head")
    tcn_layers: int = Field(3, ge=1, description="Dilated causal layers per head")
    tcn_kernel: int = Field(3, ge=1, description="TCN kernel size")
    tcn_channels: int = Field(16, ge=1, description="Channel width")
    grid_rows: int = Field(4, ge=1, description="Rows of the global-block reshape")
    global_kernel: int = Field(3, ge=1, description="Global-block conv2d kernel")
    dropout: float = Field(0.05, ge=0.0, lt=1.0, description="TCN dropout")
    causal_conv: bool = Field(True, description="Dilated causal TCN (false: plain same-padded conv1d)")
    global_block: bool = Field(True, description="Include the global block")

    # Training
    epochs: int = Field(100, ge=1, description="Maximum epochs")
    batch_size: int = Field(32, ge=1, description="Windows per batch")
    lr: float = Field(1e-3, ge=0.0, description="Adam learning rate")
    patience: int = Field(10, ge=0, description="Early-stopping patience in epochs")
    seed: int = Field(42, description="Seed for initialization, shuffling and noise")
    split_fractions: Tuple[float, float, float] = Field(DEFAULT_SPLIT, description="Chronological train, val, test fractions")

    # Evaluation
    horizons: List[PositiveInt] = Field(default_factory=lambda: [24], description="Horizons for evaluate / ablate")
    noise_ratios: List[NoiseRatio] = Field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2], description="Robustness noise ratios")
    sigma_scale: float = Field(1.0, ge=0.0, description="Noise std as a fraction of the training std")
    input_lens: List[PositiveInt] = Field(default_factory=lambda: [48, 96, 192, 336], description="Input lengths for sweep-input")
    bench_lengths: List[PositiveInt] = Field(default_factory=lambda: [96, 192, 384, 768, 1536], description="Bench input lengths")
    bench_repeats: int = Field(3, ge=1, description="Timing repeats per bench length")
    jobs: int = Field(1, ge=1, description="Worker lanes for per-variable training")

    # Output
    output_dir: str = Field("outputs", description="Directory for checkpoints, reports and plots")

    @field_validator("data")
    @classmethod
    def _data_exists(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and not Path(value).exists():
            raise ValueError(f"data file not found: {value}")
        return value

    @field_validator("split_fractions")
    @classmethod
    def _fractions(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        return check_fractions(value)

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "RunConfig":
        unknown = set(values) - set(cls.model_fields)
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls.model_validate(dict(values))
        except ValidationError as e:
            raise ConfigurationError(f"invalid configuration: {e.errors()[0]['msg']}", {"errors": e.errors(include_url=False)}) from e

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        path = Path(path)
        try:
            with open(path, "r") as f:
                raw = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigurationError(f"cannot read config {path}: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigurationError(f"config {path} must be a flat key: value mapping")
        logger.debug(f"Loaded run config from {path}")
        return cls.from_mapping(raw)

    def to_yaml(self) -> str:
        lines = []
        for name, value in self.model_dump(mode="json").items():
            description = type(self).model_fields[name].description
            if description:
                lines.append(f"# {description}")
            lines.append(yaml.safe_dump({name: value}, default_flow_style=None, sort_keys=False).strip())
        return "\n".join(lines) + "\n"

    def dump(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_yaml())
        return path

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Copy with the non-``None`` entries of ``overrides`` applied and revalidated."""
        updates = {k: v for k, v in overrides.items() if v is not None}
        if not updates:
            return self
        return RunConfig.from_mapping({**self.model_dump(), **updates})

    def sdnet_config(self) -> SDNetConfig:
        return SDNetConfig(**{key: getattr(self, key) for key in SDNET_KEYS})

    def mssd_config(self, samples_per_hour: int) -> MssdConfig:
        try:
            return MssdConfig(
                samples_per_hour=samples_per_hour,
                input_len=self.input_len,
                horizon=self.horizon,
                linear_init=self.linear_init,
                seed=self.seed,
                sdnet=self.sdnet_config(),
            )
        except ValidationError as e:
            raise ConfigurationError(f"invalid model configuration: {e.errors()[0]['msg']}") from e

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            patience=self.patience,
            seed=self.seed,
            split_fractions=self.split_fractions,
        )

    def window_spec(self, horizon: Optional[int] = None) -> WindowSpec:
        return WindowSpec(input_len=self.input_len, horizon=horizon or self.horizon)


def resolve_run_config(
    path: Optional[Union[str, Path]],
    cli_overrides: Dict[str, Any],
    env_seed: Optional[int] = None,
) -> RunConfig:
    config = RunConfig.load(path) if path else RunConfig()
    if env_seed is not None:
        config = config.with_overrides({"seed": env_seed})
    return config.with_overrides(cli_overrides)
