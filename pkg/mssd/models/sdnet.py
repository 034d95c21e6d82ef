"""
SDNet: the multi-scale convolutional predictor for the Peak component.

Every head is a branch with its own local compression scale::

    embed (1x1 conv) -> local block (conv kernel=stride=scale, norm, ReLU)
      -> global block (rows x cols reshape, same-padded conv2d, residual)
      -> dilated causal TCN stack -> flatten -> linear to the horizon

Head outputs are concatenated and merged by a final linear map.
"""

from __future__ import annotations

import math
from typing import List, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from mssd.core.errors import ConfigurationError, DimensionError
from mssd.numcore import (
    Module,
    Tensor,
    add,
    as_tensor,
    concat,
    conv1d,
    conv2d,
    dropout,
    layer_norm,
    linear,
    pad_last,
    relu,
    reshape,
    slice_last,
    uniform_init,
)


class SDNetConfig(BaseModel):
    """Hyperparameters of the Peak predictor."""
    num_heads: int = Field(2, ge=1, description="Number of heads l")
    kernel_scales: List[int] = Field(default_factory=lambda: [2, 3], description="Local conv kernel=stride per head")
    tcn_layers: int = Field(3, ge=1)
    tcn_kernel: int = Field(3, ge=1)
    tcn_channels: int = Field(16, ge=1, description="Channel embedding width")
    grid_rows: int = Field(4, ge=1, description="Rows of the 2-D reshape in the global block")
    global_kernel: int = Field(3, ge=1)
    dropout: float = Field(0.05, ge=0.0, lt=1.0)
    causal_conv: bool = Field(True, description="Dilated causal TCN convs; off uses plain same-padded conv1d")
    global_block: bool = Field(True, description="Include the 2-D global block")

    @model_validator(mode="after")
    def _heads_match_scales(self) -> "SDNetConfig":
        if len(self.kernel_scales) != self.num_heads:
            raise ValueError(
                f"kernel_scales has {len(self.kernel_scales)} entries for {self.num_heads} heads"
            )
        if any(scale < 1 for scale in self.kernel_scales):
            raise ValueError("kernel scales must be >= 1")
        return self


def _as_batch(x: Union[Tensor, np.ndarray]) -> Tuple[Tensor, bool]:
    x = as_tensor(x)
    if x.ndim == 1:
        return reshape(x, (1, x.shape[0])), True
    return x, False


class LocalBlock(Module):
    """Strided compression: conv1d with kernel = stride = scale, norm, ReLU."""

    def __init__(self, channels: int, scale: int, rng: np.random.Generator):
        super().__init__()
        self.scale = scale
        fan_in = channels * scale
        self.add_parameter("weight", uniform_init(rng, (channels, channels, scale), fan_in))
        self.add_parameter("bias", uniform_init(rng, (channels,), fan_in))
        self.add_parameter("norm_scale", np.ones(channels))
        self.add_parameter("norm_shift", np.zeros(channels))

    def __call__(self, x: Tensor) -> Tensor:
        p = self.params
        out = conv1d(x, p["weight"], p["bias"], stride=self.scale, padding="causal")
        return relu(layer_norm(out, p["norm_scale"], p["norm_shift"]))


def local_block(block: LocalBlock, x: Tensor) -> Tensor:
    return block(x)


class GlobalBlock(Module):
    """Correlations across the compressed sequence through a 2-D reshape.

    The sequence is zero-padded to a multiple of ``grid_rows``, folded
    row-major into ``[channels, grid_rows, cols]``, convolved with a
    same-padded conv2d and ReLU, unfolded, truncated, and added to the input.
    """

    def __init__(self, channels: int, grid_rows: int, kernel: int, rng: np.random.Generator):
        super().__init__()
        self.grid_rows = grid_rows
        fan_in = channels * kernel * kernel
        self.add_parameter("weight", uniform_init(rng, (channels, channels, kernel, kernel), fan_in))
        self.add_parameter("bias", uniform_init(rng, (channels,), fan_in))

    def __call__(self, x: Tensor) -> Tensor:
        length = x.shape[-1]
        padded_len = math.ceil(length / self.grid_rows) * self.grid_rows
        cols = padded_len // self.grid_rows
        grid = reshape(pad_last(x, 0, padded_len - length), x.shape[:-1] + (self.grid_rows, cols))
        mixed = relu(conv2d(grid, self.params["weight"], self.params["bias"], padding="same"))
        flat = reshape(mixed, x.shape[:-1] + (padded_len,))
        if padded_len != length:
            flat = slice_last(flat, 0, length)
        return add(flat, x)


def global_block(block: GlobalBlock, x: Tensor) -> Tensor:
    return block(x)


class TemporalBlock(Module):
    """Residual dilated causal conv: conv, norm, ReLU, dropout, plus input."""

    def __init__(
        self,
        channels: int,
        kernel: int,
        dilation: int,
        dropout_p: float,
        rng: np.random.Generator,
        causal: bool = True,
    ):
        super().__init__()
        self.kernel = kernel
        self.dilation = dilation if causal else 1
        self.padding = "causal" if causal else "same"
        self.dropout_p = dropout_p
        self.rng = rng
        fan_in = channels * kernel
        self.add_parameter("weight", uniform_init(rng, (channels, channels, kernel), fan_in))
        self.add_parameter("bias", uniform_init(rng, (channels,), fan_in))
        self.add_parameter("norm_scale", np.ones(channels))
        self.add_parameter("norm_shift", np.zeros(channels))

    def __call__(self, x: Tensor) -> Tensor:
        p = self.params
        out = conv1d(x, p["weight"], p["bias"], dilation=self.dilation, padding=self.padding)
        out = relu(layer_norm(out, p["norm_scale"], p["norm_shift"]))
        out = dropout(out, self.dropout_p, self.rng, self.training)
        return add(out, x)


class TCNStack(Module):
    """``layers`` temporal blocks with dilations 1, 2, 4, ..., 2**(layers-1).

    One causal conv per block gives a receptive field of
    ``1 + (kernel - 1) * (2**layers - 1)`` positions.
    """

    def __init__(
        self,
        channels: int,
        layers: int,
        kernel: int,
        dropout_p: float,
        rng: np.random.Generator,
        causal: bool = True,
    ):
        super().__init__()
        if layers < 1:
            raise ConfigurationError(f"TCN needs at least one layer, got {layers}")
        self.blocks = [
            self.add_module(
                f"block{index}",
                TemporalBlock(channels, kernel, 2 ** index, dropout_p, rng, causal=causal),
            )
            for index in range(layers)
        ]

    @property
    def receptive_field(self) -> int:
        kernel = self.blocks[0].kernel
        return 1 + (kernel - 1) * sum(block.dilation for block in self.blocks)

    def __call__(self, x: Tensor) -> Tensor:
        for block in self.blocks:
            x = block(x)
        return x


def tcn_stack(stack: TCNStack, x: Tensor) -> Tensor:
    return stack(x)


class SDNetBranch(Module):
    """One head: embed, local, global, TCN, projection to the horizon."""

    def __init__(self, config: SDNetConfig, scale: int, in_len: int, out_len: int, rng: np.random.Generator):
        super().__init__()
        if scale > in_len:
            raise ConfigurationError(f"kernel scale {scale} exceeds peak input length {in_len}")
        channels = config.tcn_channels
        self.channels = channels
        self.scale = scale
        self.in_len = in_len
        self.compressed_len = math.ceil(in_len / scale)
        self.add_parameter("embed_weight", uniform_init(rng, (channels, 1, 1), 1))
        self.add_parameter("embed_bias", uniform_init(rng, (channels,), 1))
        self.local = self.add_module("local", LocalBlock(channels, scale, rng))
        self.global_mix = None
        if config.global_block:
            self.global_mix = self.add_module(
                "global", GlobalBlock(channels, config.grid_rows, config.global_kernel, rng)
            )
        self.tcn = self.add_module(
            "tcn",
            TCNStack(channels, config.tcn_layers, config.tcn_kernel, config.dropout, rng, causal=config.causal_conv),
        )
        flat = channels * self.compressed_len
        self.head = self.add_module("head", _Dense(flat, out_len, rng))

    def __call__(self, x: Tensor) -> Tensor:
        """``x`` is ``[batch, in_len]``; returns ``[batch, out_len]``."""
        batch = x.shape[0]
        h = reshape(x, (batch, 1, self.in_len))
        h = conv1d(h, self.params["embed_weight"], self.params["embed_bias"])
        h = self.local(h)
        if self.global_mix is not None:
            h = self.global_mix(h)
        h = self.tcn(h)
        return self.head(reshape(h, (batch, self.channels * self.compressed_len)))


class _Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        super().__init__()
        self.add_parameter("weight", uniform_init(rng, (n_out, n_in), n_in))
        self.add_parameter("bias", uniform_init(rng, (n_out,), n_in))

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.params["weight"], self.params["bias"])


def multi_head_split(x_p: Tensor, config: SDNetConfig) -> List[Tensor]:
    """Route the same peak input to each of the ``num_heads`` branches."""
    return [x_p] * config.num_heads


class SDNet(Module):
    def __init__(self, config: SDNetConfig, in_len: int, out_len: int, rng: np.random.Generator):
        super().__init__()
        self.config = config
        self.in_len = in_len
        self.out_len = out_len
        self.branches = [
            self.add_module(f"head{index}", SDNetBranch(config, scale, in_len, out_len, rng))
            for index, scale in enumerate(config.kernel_scales)
        ]
        self.merge = self.add_module("merge", _Dense(config.num_heads * out_len, out_len, rng))

    def __call__(self, x_p: Union[Tensor, np.ndarray]) -> Tensor:
        x, unbatched = _as_batch(x_p)
        if x.shape[-1] != self.in_len:
            raise DimensionError(f"SDNet expects {self.in_len} peak values, got {x.shape[-1]}")
        heads = [branch(view) for branch, view in zip(self.branches, multi_head_split(x, self.config))]
        merged = self.merge(concat(heads, axis=-1))
        if unbatched:
            return reshape(merged, (self.out_len,))
        return merged


def sdnet_forward(sdnet: SDNet, x_p: Union[Tensor, np.ndarray]) -> Tensor:
    return sdnet(x_p)
