"""
Differentiable tensor operations.

Every function takes and returns ``Tensor`` values and records a backward
rule on the active tape. Shapes must conform exactly: the only implicit
expansion is the bias/scale vectors of ``linear`` and ``layer_norm``.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from mssd.core.errors import DimensionError
from mssd.numcore.tensor import Tensor, as_tensor, make_result

ArrayLike = Union[Tensor, np.ndarray, Sequence[float], float]


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("add", a, b)
    return make_result("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("sub", a, b)
    return make_result("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("mul", a, b)
    return make_result("mul", a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(x: Tensor, factor: float) -> Tensor:
    x = as_tensor(x)
    factor = float(factor)
    return make_result("scale", x.data * factor, (x,), lambda g: (g * factor,))


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return make_result("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def _resolve_shape(shape: Sequence[int], size: int) -> Tuple[int, ...]:
    shape = tuple(int(s) for s in shape)
    if shape.count(-1) > 1:
        raise DimensionError(f"reshape: at most one -1 allowed, got {shape}")
    if -1 in shape:
        known = int(np.prod([s for s in shape if s != -1]))
        if known == 0 or size % known:
            raise DimensionError(f"reshape: cannot infer -1 for size {size} into {shape}")
        shape = tuple(size // known if s == -1 else s for s in shape)
    if int(np.prod(shape)) != size or any(s < 1 for s in shape):
        raise DimensionError(f"reshape: cannot view {size} elements as {shape}")
    return shape


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    """Row-major reshape."""
    x = as_tensor(x)
    target = _resolve_shape(shape, x.size)
    source = x.shape
    return make_result("reshape", x.data.reshape(target), (x,), lambda g: (g.reshape(source),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat: need at least one tensor")
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            t.shape[d] != tensors[0].shape[d] for d in range(ndim) if d != axis
        ):
            raise DimensionError(
                f"concat: shapes {[t.shape for t in tensors]} differ outside axis {axis}"
            )
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def _backward(g: np.ndarray):
        index = [slice(None)] * g.ndim
        pieces = []
        for start, stop in zip(bounds[:-1], bounds[1:]):
            index[axis] = slice(int(start), int(stop))
            pieces.append(g[tuple(index)])
        return pieces

    return make_result("concat", np.concatenate([t.data for t in tensors], axis=axis), tensors, _backward)


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    axis = axis % x.ndim
    if not 0 <= start < stop <= x.shape[axis]:
        raise DimensionError(f"slice: [{start}, {stop}) outside axis of length {x.shape[axis]}")
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)
    source = x.shape

    def _backward(g: np.ndarray):
        full = np.zeros(source)
        full[index] = g
        return (full,)

    return make_result("slice", x.data[index], (x,), _backward)


def slice_last(x: Tensor, start: int, stop: int) -> Tensor:
    return slice_axis(x, -1, start, stop)


def split(x: Tensor, sizes: Sequence[int], axis: int = 0) -> List[Tensor]:
    """Inverse of ``concat``: cut ``x`` into consecutive pieces along ``axis``."""
    x = as_tensor(x)
    if sum(sizes) != x.shape[axis % x.ndim]:
        raise DimensionError(f"split: sizes {list(sizes)} do not cover axis length {x.shape[axis]}")
    pieces, start = [], 0
    for size in sizes:
        pieces.append(slice_axis(x, axis, start, start + size))
        start += size
    return pieces


def pad_last(x: Tensor, left: int, right: int) -> Tensor:
    """Zero-pad the last axis."""
    x = as_tensor(x)
    if left == 0 and right == 0:
        return x
    widths = [(0, 0)] * (x.ndim - 1) + [(left, right)]
    length = x.shape[-1]
    return make_result(
        "pad", np.pad(x.data, widths), (x,), lambda g: (g[..., left:left + length],)
    )


def gather(x: Tensor, index: np.ndarray) -> Tensor:
    """Select positions along the last axis.

    ``index`` is either 1-D (same positions for every row) or has the leading
    shape of ``x`` with its own last-axis length (positions per row).
    """
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    if index.ndim == 1:
        index = np.broadcast_to(index, x.shape[:-1] + index.shape)
    if index.shape[:-1] != x.shape[:-1]:
        raise DimensionError(f"gather: index shape {index.shape} does not match input {x.shape}")
    if index.size and (index.min() < 0 or index.max() >= x.shape[-1]):
        raise DimensionError(f"gather: index out of range for last axis {x.shape[-1]}")
    source = x.shape

    def _backward(g: np.ndarray):
        rows = int(np.prod(source[:-1])) if len(source) > 1 else 1
        flat_index = index.reshape(rows, -1)
        full = np.zeros((rows, source[-1]))
        np.add.at(full, (np.arange(rows)[:, None], flat_index), g.reshape(rows, -1))
        return (full.reshape(source),)

    return make_result("gather", np.take_along_axis(x.data, index, axis=-1), (x,), _backward)


def sum_all(x: Tensor) -> Tensor:
    x = as_tensor(x)
    source = x.shape
    return make_result("sum", np.array([x.data.sum()]), (x,), lambda g: (np.full(source, g[0]),))


def mean(x: Tensor) -> Tensor:
    x = as_tensor(x)
    source, count = x.shape, x.size
    return make_result(
        "mean", np.array([x.data.mean()]), (x,), lambda g: (np.full(source, g[0] / count),)
    )


def mse_loss(pred: Tensor, target: ArrayLike) -> Tensor:
    """Mean of squared differences over all elements."""
    pred, target = as_tensor(pred), as_tensor(target)
    _same_shape("mse_loss", pred, target)
    diff = pred.data - target.data
    count = diff.size

    def _backward(g: np.ndarray):
        grad = (2.0 * g[0] / count) * diff
        return grad, -grad

    return make_result("mse_loss", np.array([np.mean(diff * diff)]), (pred, target), _backward)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Affine map over the last axis: ``x @ weight.T + bias``.

    Args:
        x: ``[..., n_in]``
        weight: ``[n_out, n_in]``
        bias: ``[n_out]`` or None
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"linear: input {x.shape} does not conform to weight {weight.shape}")
    n_out, n_in = weight.shape
    out = x.data @ weight.data.T
    inputs: Tuple[Tensor, ...] = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (n_out,):
            raise DimensionError(f"linear: bias {bias.shape} does not match {n_out} outputs")
        out = out + bias.data
        inputs = inputs + (bias,)

    def _backward(g: np.ndarray):
        g2 = g.reshape(-1, n_out)
        x2 = x.data.reshape(-1, n_in)
        grads = [(g @ weight.data).reshape(x.shape), g2.T @ x2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return grads

    return make_result("linear", out, inputs, _backward)


def layer_norm(
    x: Tensor,
    scale: Optional[Tensor] = None,
    shift: Optional[Tensor] = None,
    eps: float = 1e-5,
) -> Tensor:
    """Per-position normalization over the channel axis.

    ``x`` is ``[..., channels, length]``; at every position the channel values
    are standardized with their population variance plus ``eps`` and then
    mapped by the per-channel ``scale``/``shift``.
    """
    x = as_tensor(x)
    if x.ndim < 2:
        raise DimensionError(f"layer_norm: need [..., channels, length], got {x.shape}")
    channels = x.shape[-2]
    inputs: List[Tensor] = [x]
    gamma = beta = None
    if scale is not None:
        scale = as_tensor(scale)
        if scale.shape != (channels,):
            raise DimensionError(f"layer_norm: scale {scale.shape} does not match {channels} channels")
        gamma = scale.data[:, None]
        inputs.append(scale)
    if shift is not None:
        shift = as_tensor(shift)
        if shift.shape != (channels,):
            raise DimensionError(f"layer_norm: shift {shift.shape} does not match {channels} channels")
        beta = shift.data[:, None]
        inputs.append(shift)

    mu = x.data.mean(axis=-2, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-2, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat
    if gamma is not None:
        out = out * gamma
    if beta is not None:
        out = out + beta
    reduce_axes = tuple(range(x.ndim - 2)) + (x.ndim - 1,)

    def _backward(g: np.ndarray):
        dxhat = g * gamma if gamma is not None else g
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=-2, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-2, keepdims=True)
        )
        grads = [dx]
        if scale is not None:
            grads.append((g * xhat).sum(axis=reduce_axes))
        if shift is not None:
            grads.append(g.sum(axis=reduce_axes))
        return grads

    return make_result("layer_norm", out, inputs, _backward)


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool = True) -> Tensor:
    """Inverted dropout; identity when not training or ``p == 0``."""
    x = as_tensor(x)
    if not training or p <= 0.0:
        return x
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    return make_result("dropout", x.data * keep, (x,), lambda g: (g * keep,))


def transpose_last2(x: Tensor) -> Tensor:
    x = as_tensor(x)
    if x.ndim < 2:
        raise DimensionError(f"transpose: need at least 2 axes, got {x.shape}")
    return make_result(
        "transpose", np.swapaxes(x.data, -1, -2), (x,), lambda g: (np.swapaxes(g, -1, -2),)
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product ``[..., m, k] @ [..., k, n]`` with equal leading axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or a.ndim != b.ndim or a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not conform")

    def _backward(g: np.ndarray):
        return g @ np.swapaxes(b.data, -1, -2), np.swapaxes(a.data, -1, -2) @ g

    return make_result("matmul", a.data @ b.data, (a, b), _backward)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    y = expd / expd.sum(axis=-1, keepdims=True)

    def _backward(g: np.ndarray):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return make_result("softmax", y, (x,), _backward)
