"""
Synthetic daily-seasonal series.
"""

import logging

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from mssd.core.errors import ConfigurationError
from mssd.data.frame import SeriesFrame

logger = logging.getLogger(__name__)


class SynthComponents(BaseModel):
    amplitude: float = Field(1.0, gt=0.0, description="Daily amplitude A")
    trend_slope: float = Field(0.0, description="Level change per day")
    noise_std: float = Field(0.1, ge=0.0)
    peak_sharpness: float = Field(2.0, gt=0.0, description="Width control of the midday bump")


def daily_profile(samples_per_hour: int, components: SynthComponents) -> np.ndarray:
    """One day: rising ramp, sharp bump centred in the middle third, falling ramp."""
    period = 24 * samples_per_hour
    third = period // 3
    v = np.arange(third) / third
    a = components.amplitude
    rising = 0.2 * a + 0.6 * a * v
    peak = 0.8 * a + 0.6 * a * np.exp(-components.peak_sharpness * ((v - 0.5) * 6.0) ** 2)
    falling = 0.8 * a - 0.6 * a * v
    return np.concatenate([rising, peak, falling])


def synth_seasonal(
    days: int,
    samples_per_hour: int = 1,
    components: SynthComponents = SynthComponents(),
    seed: int = 0,
    start: str = "2020-01-01",
    name: str = "synth",
) -> SeriesFrame:
    """Deterministic daily-seasonal series with linear trend and gaussian noise.

    The first sample sits at midnight, so phase origin is 0.
    """
    if days < 2:
        raise ConfigurationError(f"synth_seasonal needs at least 2 days, got {days}")
    period = 24 * samples_per_hour
    n = days * period
    t = np.arange(n)
    values = np.tile(daily_profile(samples_per_hour, components), days)
    values = values + components.trend_slope * (t / period)
    if components.noise_std > 0:
        values = values + np.random.default_rng(seed).normal(0.0, components.noise_std, size=n)
    stamps = pd.date_range(pd.Timestamp(start).normalize(), periods=n, freq=pd.Timedelta(hours=1) / samples_per_hour)
    logger.debug(f"Synthesized {days} days at i={samples_per_hour} ({components.model_dump()})")
    return SeriesFrame(
        name=name,
        values=values[:, None],
        samples_per_hour=samples_per_hour,
        variable_names=["value"],
        timestamps=stamps.to_numpy(dtype="datetime64[ns]"),
    )
