"""
Naive quadratic self-attention, used only as a timing reference.
"""

import numpy as np

from mssd.numcore import Module, Tensor, linear, matmul, scale, softmax, transpose_last2, uniform_init


class NaiveSelfAttention(Module):
    """Single-head dot-product attention over ``[batch, channels, length]``."""

    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        self.channels = channels
        for name in ("query", "key", "value"):
            self.add_parameter(f"{name}_weight", uniform_init(rng, (channels, channels), channels))
            self.add_parameter(f"{name}_bias", uniform_init(rng, (channels,), channels))

    def __call__(self, x: Tensor) -> Tensor:
        p = self.params
        tokens = transpose_last2(x)
        q = linear(tokens, p["query_weight"], p["query_bias"])
        k = linear(tokens, p["key_weight"], p["key_bias"])
        v = linear(tokens, p["value_weight"], p["value_bias"])
        scores = scale(matmul(q, transpose_last2(k)), 1.0 / np.sqrt(self.channels))
        return transpose_last2(matmul(softmax(scores), v))
