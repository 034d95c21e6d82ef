"""
MSSD: decomposition, three phase predictors, reassembly.
"""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from mssd.core.errors import DimensionError
from mssd.decompose import PeriodSpec, Phase, make_period_spec, phase_positions, reassembly_order
from mssd.models.linear import LinearPhasePredictor
from mssd.models.sdnet import SDNet, SDNetConfig
from mssd.numcore import Module, Tensor, as_tensor, concat, gather, reshape

if TYPE_CHECKING:
    from mssd.training.normalize import NormStats

logger = logging.getLogger(__name__)


class MssdConfig(BaseModel):
    """Structure of one univariate MSSD model."""
    samples_per_hour: int = Field(1, ge=1)
    input_len: int = Field(96, ge=1)
    horizon: int = Field(24, ge=1)
    linear_init: str = Field("naive", pattern=r"^(naive|uniform|zeros)$")
    seed: int = 42
    sdnet: SDNetConfig = Field(default_factory=SDNetConfig)

    @model_validator(mode="after")
    def _whole_periods(self) -> "MssdConfig":
        period = 24 * self.samples_per_hour
        for name in ("input_len", "horizon"):
            value = getattr(self, name)
            if value % period:
                raise ValueError(f"{name}={value} must be a multiple of the {period}-sample period")
        return self


class MssdModel(Module):
    """Composite of two linear phase predictors and one SDNet."""

    def __init__(self, config: MssdConfig, norm_stats: Optional[NormStats] = None):
        super().__init__()
        self.config = config
        self.spec: PeriodSpec = make_period_spec(config.samples_per_hour)
        self.input_len = config.input_len
        self.horizon = config.horizon
        self.norm_stats = norm_stats
        rng = np.random.default_rng(config.seed)
        phase_len = self.spec.phase_len
        in_phase = self.input_len // 3
        out_phase = self.horizon // 3
        self.predictor_u = self.add_module(
            "predictor_u", LinearPhasePredictor(in_phase, out_phase, phase_len, rng, config.linear_init)
        )
        self.predictor_d = self.add_module(
            "predictor_d", LinearPhasePredictor(in_phase, out_phase, phase_len, rng, config.linear_init)
        )
        self.sdnet = self.add_module("sdnet", SDNet(config.sdnet, in_phase, out_phase, rng))
        logger.debug(
            f"MssdModel I={self.input_len} O={self.horizon} T={self.spec.period_T} "
            f"parameters={self.num_parameters()}"
        )

    def _index(self, length: int, offsets: np.ndarray, phase: Optional[Phase] = None) -> np.ndarray:
        if phase is None:
            return np.stack([reassembly_order(length, self.spec, int(o)) for o in offsets])
        return np.stack([phase_positions(length, self.spec, int(o), phase) for o in offsets])

    def __call__(self, window: Union[Tensor, np.ndarray], start_offset: Union[int, Sequence[int]] = 0) -> Tensor:
        """Forecast ``horizon`` normalized values.

        Args:
            window: ``[input_len]`` or ``[batch, input_len]`` normalized inputs.
            start_offset: In-day position of the first input, scalar or one per row.
        """
        window = as_tensor(window)
        unbatched = window.ndim == 1
        if unbatched:
            window = reshape(window, (1, window.shape[0]))
        if window.ndim != 2 or window.shape[-1] != self.input_len:
            raise DimensionError(f"MSSD expects windows of length {self.input_len}, got {window.shape}")
        batch = window.shape[0]
        offsets = np.broadcast_to(np.asarray(start_offset, dtype=np.int64) % self.spec.period_T, (batch,))
        horizon_offsets = (offsets + self.input_len) % self.spec.period_T

        y_u = self.predictor_u(gather(window, self._index(self.input_len, offsets, Phase.ASCENDING)))
        y_p = self.sdnet(gather(window, self._index(self.input_len, offsets, Phase.PEAK)))
        y_d = self.predictor_d(gather(window, self._index(self.input_len, offsets, Phase.DESCENDING)))
        forecast = gather(concat([y_u, y_p, y_d], axis=-1), self._index(self.horizon, horizon_offsets))
        if unbatched:
            return reshape(forecast, (self.horizon,))
        return forecast


def mssd_forward(model: MssdModel, window: Union[Tensor, np.ndarray], start_offset: int = 0) -> Tensor:
    return model(window, start_offset)
