"""
Linear phase predictor for the Ascending and Descending components.
"""

from __future__ import annotations

from typing import Union

import numpy as np

from mssd.core.errors import ConfigurationError, DimensionError
from mssd.numcore import Module, Tensor, as_tensor, linear, uniform_init

LINEAR_INITS = ("naive", "uniform", "zeros")


class LinearPhasePredictor(Module):
    """Affine map from the phase values of the input window to those of the horizon.

    ``init="naive"`` starts from the seasonal-naive map: output value ``j``
    copies the input value one period before the horizon at the same clock
    position, so training begins at the repeat-last-day forecast.
    """

    def __init__(
        self,
        in_len: int,
        out_len: int,
        phase_len: int,
        rng: np.random.Generator,
        init: str = "naive",
    ):
        super().__init__()
        if init not in LINEAR_INITS:
            raise ConfigurationError(f"Unknown linear init {init!r}; expected one of {LINEAR_INITS}")
        self.in_len = in_len
        self.out_len = out_len
        self.phase_len = phase_len
        if init == "naive":
            if in_len < phase_len:
                raise ConfigurationError(
                    f"seasonal-naive init needs one full phase ({phase_len}) of input, got {in_len}"
                )
            weight = np.zeros((out_len, in_len))
            rows = np.arange(out_len)
            weight[rows, in_len - phase_len + rows % phase_len] = 1.0
            bias = np.zeros(out_len)
        elif init == "uniform":
            weight = uniform_init(rng, (out_len, in_len), in_len)
            bias = uniform_init(rng, (out_len,), in_len)
        else:
            weight = np.zeros((out_len, in_len))
            bias = np.zeros(out_len)
        self.add_parameter("weight", weight)
        self.add_parameter("bias", bias)

    def __call__(self, phase_values: Union[Tensor, np.ndarray]) -> Tensor:
        phase_values = as_tensor(phase_values)
        if phase_values.shape[-1] != self.in_len:
            raise DimensionError(
                f"LinearPhasePredictor expects {self.in_len} phase values, got {phase_values.shape[-1]}"
            )
        return linear(phase_values, self.params["weight"], self.params["bias"])


def linear_phase_forward(pred: LinearPhasePredictor, phase_values: Union[Tensor, np.ndarray]) -> Tensor:
    return pred(phase_values)
