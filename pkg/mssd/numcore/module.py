"""
Parameter containers.

A ``Module`` owns named parameter tensors and child modules. Tensors are
immutable, so an optimizer update replaces the registered tensor; forward
code must therefore read parameters through ``self.params`` on every call.
"""

from __future__ import annotations

from typing import Dict, Iterator, Mapping, Tuple

import numpy as np

from mssd.core.errors import ContractViolation
from mssd.numcore.tensor import Tensor


class Module:
    def __init__(self):
        self.params: Dict[str, Tensor] = {}
        self._children: Dict[str, "Module"] = {}
        self.training = True

    def add_parameter(self, name: str, value: np.ndarray) -> Tensor:
        tensor = Tensor.parameter(value)
        self.params[name] = tensor
        return tensor

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def children(self) -> Iterator[Tuple[str, "Module"]]:
        return iter(self._children.items())

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self.params.items():
            yield prefix + name, tensor
        for child_name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{child_name}.")

    def parameters(self) -> Dict[str, Tensor]:
        return dict(self.named_parameters())

    def num_parameters(self) -> int:
        return sum(t.size for _, t in self.named_parameters())

    def _owner(self, full_name: str) -> Tuple["Module", str]:
        module = self
        *path, leaf = full_name.split(".")
        for part in path:
            if part not in module._children:
                raise ContractViolation(f"Unknown parameter path: {full_name}")
            module = module._children[part]
        if leaf not in module.params:
            raise ContractViolation(f"Unknown parameter: {full_name}")
        return module, leaf

    def set_parameter(self, full_name: str, value: np.ndarray) -> None:
        module, leaf = self._owner(full_name)
        current = module.params[leaf]
        value = np.asarray(value, dtype=np.float64)
        if value.shape != current.shape:
            raise ContractViolation(
                f"Parameter {full_name} expects shape {current.shape}, got {value.shape}"
            )
        module.params[leaf] = Tensor.parameter(value)

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: tensor.numpy() for name, tensor in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        expected = set(self.parameters())
        missing, unexpected = expected - set(state), set(state) - expected
        if missing or unexpected:
            raise ContractViolation(
                "State dict does not match module",
                {"missing": sorted(missing), "unexpected": sorted(unexpected)},
            )
        for name, value in state.items():
            self.set_parameter(name, value)

    def train(self) -> "Module":
        self.training = True
        for _, child in self._children.items():
            child.train()
        return self

    def eval(self) -> "Module":
        self.training = False
        for _, child in self._children.items():
            child.eval()
        return self


def uniform_init(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual conv/linear default."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)
