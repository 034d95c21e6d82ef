"""
Adam optimizer.

``adam_step`` is the pure update over name-keyed parameter and gradient maps;
``Adam`` binds it to a ``Module`` and keeps the moment buffers between steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from mssd.core.errors import ContractViolation
from mssd.numcore.module import Module
from mssd.numcore.tensor import Gradients, Tensor

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Moment buffers, zero-initialized on the first step."""
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[Dict[str, Tensor], AdamState]:
    """One bias-corrected Adam update.

    Args:
        params: Parameter tensors by name.
        grads: Gradients by name. A parameter without an entry keeps its value
            and its moment buffers.
        state: Moment buffers from the previous step.

    Returns:
        New parameter tensors and the advanced state.
    """
    step = state.step + 1
    new_params: Dict[str, Tensor] = {}
    new_m: Dict[str, np.ndarray] = {}
    new_v: Dict[str, np.ndarray] = {}
    correction1 = 1.0 - beta1 ** step
    correction2 = 1.0 - beta2 ** step

    for name, param in params.items():
        grad = grads.get(name)
        m = state.m.get(name, np.zeros(param.shape))
        v = state.v.get(name, np.zeros(param.shape))
        if grad is None:
            new_params[name] = param
            new_m[name] = m
            new_v[name] = v
            continue
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != param.shape or m.shape != param.shape or v.shape != param.shape:
            raise ContractViolation(
                f"Adam buffers for {name} do not match parameter shape {param.shape}"
            )
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        new_params[name] = Tensor.parameter(param.data - update)
        new_m[name] = m
        new_v[name] = v

    return new_params, AdamState(step=step, m=new_m, v=new_v)


class Adam:
    """Adam bound to a module's parameters."""

    def __init__(
        self,
        module: Module,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.module = module
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState()

    def step(self, gradients: Gradients) -> None:
        params = self.module.parameters()
        by_name: Dict[str, np.ndarray] = {}
        for name, tensor in params.items():
            grad: Optional[np.ndarray] = gradients.get(tensor)
            if grad is not None:
                by_name[name] = grad
        updated, self.state = adam_step(
            params, by_name, self.state, self.lr, self.beta1, self.beta2, self.eps
        )
        for name, tensor in updated.items():
            self.module.set_parameter(name, tensor.data)
