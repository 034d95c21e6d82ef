"""
Convolution primitives (cross-correlation, as in most deep learning stacks).

Both functions accept an optional leading batch axis and lower the
convolution to tap-wise ``einsum`` products over strided views.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from mssd.core.errors import DimensionError, EmptyOutputError
from mssd.numcore.tensor import Tensor, as_tensor, make_result

CONV1D_PADDINGS = ("valid", "causal", "same")
CONV2D_PADDINGS = ("valid", "same")


def conv1d_output_length(length: int, kernel: int, stride: int = 1, dilation: int = 1, padding: str = "valid") -> int:
    if padding == "causal":
        return math.ceil(length / stride)
    span = dilation * (kernel - 1)
    if padding == "same":
        return (length - 1) // stride + 1
    return (length - span - 1) // stride + 1


def _pad_amounts_1d(kernel: int, dilation: int, padding: str) -> Tuple[int, int]:
    span = dilation * (kernel - 1)
    if padding == "causal":
        return span, 0
    if padding == "same":
        return span // 2, span - span // 2
    return 0, 0


def conv1d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    dilation: int = 1,
    padding: str = "valid",
) -> Tensor:
    """1-D convolution.

    Args:
        x: ``[channels_in, length]`` or ``[batch, channels_in, length]``
        weight: ``[channels_out, channels_in, kernel]``
        bias: ``[channels_out]`` or None
        stride: Step between output positions.
        dilation: Gap between kernel taps.
        padding: ``"valid"``; ``"causal"`` left-pads ``(kernel-1)*dilation``
            zeros so output ``t`` only sees inputs ``<= t*stride``; ``"same"``
            pads both sides so stride 1 preserves length.

    Returns:
        ``[channels_out, out_length]`` (batched input keeps its batch axis).
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if padding not in CONV1D_PADDINGS:
        raise DimensionError(f"conv1d: unknown padding {padding!r}")
    if stride < 1 or dilation < 1:
        raise DimensionError(f"conv1d: stride and dilation must be >= 1, got {stride}, {dilation}")
    batched = x.ndim == 3
    if x.ndim not in (2, 3) or weight.ndim != 3:
        raise DimensionError(f"conv1d: bad ranks input {x.shape}, weight {weight.shape}")
    c_out, c_in, kernel = weight.shape
    if x.shape[-2] != c_in:
        raise DimensionError(f"conv1d: input has {x.shape[-2]} channels, weight expects {c_in}")

    data = x.data if batched else x.data[None]
    left, right = _pad_amounts_1d(kernel, dilation, padding)
    padded = np.pad(data, ((0, 0), (0, 0), (left, right))) if left or right else data
    padded_len = padded.shape[-1]
    if dilation * (kernel - 1) + 1 > padded_len:
        raise EmptyOutputError(f"conv1d: kernel span exceeds padded length {padded_len}")
    out_len = (padded_len - dilation * (kernel - 1) - 1) // stride + 1
    if out_len < 1:
        raise EmptyOutputError("conv1d: output length < 1")

    stop = stride * (out_len - 1) + 1
    cols = np.stack(
        [padded[:, :, j * dilation: j * dilation + stop: stride] for j in range(kernel)], axis=2
    )
    out = np.einsum("bckt,ock->bot", cols, weight.data, optimize=True)
    inputs = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise DimensionError(f"conv1d: bias {bias.shape} does not match {c_out} channels")
        out = out + bias.data[None, :, None]
        inputs.append(bias)

    def _backward(g: np.ndarray):
        g3 = g if batched else g[None]
        grad_w = np.einsum("bot,bckt->ock", g3, cols, optimize=True)
        grad_cols = np.einsum("bot,ock->bckt", g3, weight.data, optimize=True)
        grad_padded = np.zeros(padded.shape)
        for j in range(kernel):
            grad_padded[:, :, j * dilation: j * dilation + stop: stride] += grad_cols[:, :, j]
        grad_x = grad_padded[:, :, left: padded_len - right]
        grads = [grad_x if batched else grad_x[0], grad_w]
        if bias is not None:
            grads.append(g3.sum(axis=(0, 2)))
        return grads

    return make_result("conv1d", out if batched else out[0], inputs, _backward)


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    padding: str = "valid",
) -> Tensor:
    """Stride-1 2-D cross-correlation.

    Args:
        x: ``[channels_in, height, width]`` or ``[batch, channels_in, height, width]``
        weight: ``[channels_out, channels_in, kh, kw]``
        bias: ``[channels_out]`` or None
        padding: ``"valid"`` or ``"same"`` (height and width preserved).
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if padding not in CONV2D_PADDINGS:
        raise DimensionError(f"conv2d: unknown padding {padding!r}")
    batched = x.ndim == 4
    if x.ndim not in (3, 4) or weight.ndim != 4:
        raise DimensionError(f"conv2d: bad ranks input {x.shape}, weight {weight.shape}")
    c_out, c_in, kh, kw = weight.shape
    if x.shape[-3] != c_in:
        raise DimensionError(f"conv2d: input has {x.shape[-3]} channels, weight expects {c_in}")

    data = x.data if batched else x.data[None]
    if padding == "same":
        top, left = (kh - 1) // 2, (kw - 1) // 2
        pads = ((0, 0), (0, 0), (top, kh - 1 - top), (left, kw - 1 - left))
        padded = np.pad(data, pads)
    else:
        top = left = 0
        padded = data
    height, width = padded.shape[-2:]
    out_h, out_w = height - kh + 1, width - kw + 1
    if out_h < 1 or out_w < 1:
        raise EmptyOutputError(f"conv2d: kernel {kh}x{kw} does not fit input {height}x{width}")

    cols = np.stack(
        [padded[:, :, i:i + out_h, j:j + out_w] for i in range(kh) for j in range(kw)], axis=2
    )
    flat_w = weight.data.reshape(c_out, c_in, kh * kw)
    out = np.einsum("bckhw,ock->bohw", cols, flat_w, optimize=True)
    inputs = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise DimensionError(f"conv2d: bias {bias.shape} does not match {c_out} channels")
        out = out + bias.data[None, :, None, None]
        inputs.append(bias)

    def _backward(g: np.ndarray):
        g4 = g if batched else g[None]
        grad_w = np.einsum("bohw,bckhw->ock", g4, cols, optimize=True).reshape(weight.shape)
        grad_cols = np.einsum("bohw,ock->bckhw", g4, flat_w, optimize=True)
        grad_padded = np.zeros(padded.shape)
        tap = 0
        for i in range(kh):
            for j in range(kw):
                grad_padded[:, :, i:i + out_h, j:j + out_w] += grad_cols[:, :, tap]
                tap += 1
        grad_x = grad_padded[:, :, top:top + data.shape[-2], left:left + data.shape[-1]]
        grads = [grad_x if batched else grad_x[0], grad_w]
        if bias is not None:
            grads.append(g4.sum(axis=(0, 2, 3)))
        return grads

    return make_result("conv2d", out if batched else out[0], inputs, _backward)
