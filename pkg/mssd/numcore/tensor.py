"""
Dense tensors and the reverse-mode gradient tape.

A ``Tensor`` wraps a read-only float64 numpy buffer. Operations in
``mssd.numcore.ops`` and ``mssd.numcore.conv`` record themselves on the
active ``GradTape`` whenever one of their inputs is grad-tracked, and
``backward`` replays the tape in reverse to produce gradients for the
grad-tracked leaves.
"""

from __future__ import annotations

import contextvars
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from mssd.core.errors import ContractViolation, DimensionError

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_ACTIVE_TAPE: contextvars.ContextVar[Optional["GradTape"]] = contextvars.ContextVar(
    "mssd_active_tape", default=None
)
_ACTIVE_TRACKER: contextvars.ContextVar[Optional["AllocationTracker"]] = contextvars.ContextVar(
    "mssd_allocation_tracker", default=None
)


class AllocationTracker:
    """Counts bytes of tensor and gradient buffers materialized while active.

    Usage::

        with AllocationTracker() as tracker:
            model(window)
        tracker.allocated_bytes
    """

    def __init__(self):
        self.allocated_bytes = 0
        self.buffer_count = 0
        self._token: Optional[contextvars.Token] = None

    def record(self, nbytes: int) -> None:
        self.allocated_bytes += int(nbytes)
        self.buffer_count += 1

    def __enter__(self) -> "AllocationTracker":
        self._token = _ACTIVE_TRACKER.set(self)
        return self

    def __exit__(self, *exc_info) -> None:
        if self._token is not None:
            _ACTIVE_TRACKER.reset(self._token)
            self._token = None


def record_allocation(nbytes: int) -> None:
    tracker = _ACTIVE_TRACKER.get()
    if tracker is not None:
        tracker.record(nbytes)


class Tensor:
    """Immutable dense float64 array with optional gradient tracking."""

    __slots__ = ("_data", "grad_tracked", "node_id", "__weakref__")

    def __init__(self, data: Any, grad_tracked: bool = False):
        array = np.array(data, dtype=np.float64)
        self._init(array, grad_tracked)

    def _init(self, array: np.ndarray, grad_tracked: bool) -> None:
        if array.ndim == 0:
            array = array.reshape(1)
        if any(dim < 1 for dim in array.shape):
            raise DimensionError(f"Tensor dimensions must all be >= 1, got {array.shape}")
        array.flags.writeable = False
        self._data = array
        self.grad_tracked = bool(grad_tracked)
        self.node_id: Optional[int] = None
        record_allocation(array.nbytes)

    @classmethod
    def wrap(cls, array: np.ndarray, grad_tracked: bool = False) -> "Tensor":
        """Build a tensor around ``array`` without copying it."""
        tensor = cls.__new__(cls)
        if array.dtype != np.float64:
            array = array.astype(np.float64)
        tensor._init(array, grad_tracked)
        return tensor

    @classmethod
    def parameter(cls, data: Any) -> "Tensor":
        return cls(data, grad_tracked=True)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def flat(self) -> np.ndarray:
        """Row-major flat view of the buffer."""
        return self._data.reshape(-1)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return self._data.size

    def numpy(self) -> np.ndarray:
        return self._data.copy()

    def item(self) -> float:
        if self._data.size != 1:
            raise ContractViolation(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self._data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor.wrap(self._data, grad_tracked=False)

    def __len__(self) -> int:
        return self._data.shape[0]

    def __repr__(self) -> str:
        tracked = ", grad_tracked=True" if self.grad_tracked else ""
        return f"Tensor(shape={self.shape}{tracked})"

    def __add__(self, other: "Tensor") -> "Tensor":
        from mssd.numcore import ops
        return ops.add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from mssd.numcore import ops
        return ops.sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from mssd.numcore import ops
        return ops.mul(self, other)

    def __neg__(self) -> "Tensor":
        from mssd.numcore import ops
        return ops.scale(self, -1.0)


def as_tensor(value: Any) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


@dataclass
class TapeNode:
    """One recorded operation."""
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class GradTape:
    """Append-only record of differentiable operations.

    The tape is single use: ``backward`` consumes it. Activate it as a context
    manager so operations executed in the block are recorded::

        with GradTape() as tape:
            loss = ops.mse_loss(model(x), y)
        grads = backward(loss, tape)
    """

    def __init__(self):
        self.nodes: List[TapeNode] = []
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "GradTape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc_info) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, inputs: Sequence[Tensor], output: Tensor, backward_fn: BackwardFn) -> None:
        output.node_id = len(self.nodes)
        self.nodes.append(TapeNode(op=op, inputs=tuple(inputs), output=output, backward=backward_fn))

    def clear(self) -> None:
        self.nodes = []


def active_tape() -> Optional[GradTape]:
    return _ACTIVE_TAPE.get()


def make_result(
    op: str,
    data: np.ndarray,
    inputs: Sequence[Tensor],
    backward_fn: BackwardFn,
) -> Tensor:
    """Wrap an op result and record it on the active tape when needed."""
    tape = _ACTIVE_TAPE.get()
    tracked = tape is not None and any(t.grad_tracked for t in inputs)
    out = Tensor.wrap(np.ascontiguousarray(data), grad_tracked=tracked)
    if tracked:
        tape.record(op, inputs, out, backward_fn)
    return out


class Gradients(Mapping):
    """Gradient map keyed by leaf tensor identity."""

    def __init__(self, entries: Dict[int, Tuple[Tensor, np.ndarray]]):
        self._entries = entries

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        try:
            return self._entries[id(tensor)][1]
        except KeyError:
            raise KeyError(f"No gradient recorded for {tensor!r}") from None

    def __contains__(self, tensor: object) -> bool:
        return id(tensor) in self._entries

    def get(self, tensor: Tensor, default: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
        entry = self._entries.get(id(tensor))
        return default if entry is None else entry[1]

    def __iter__(self) -> Iterator[Tensor]:
        return (tensor for tensor, _ in self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)


def backward(loss: Tensor, tape: Optional[GradTape] = None) -> Gradients:
    """Reverse-mode pass from a scalar loss.

    Args:
        loss: Single-element tensor produced on ``tape``.
        tape: Tape to replay; defaults to the active tape.

    Returns:
        Gradients for every grad-tracked leaf reachable from ``loss``.
    """
    tape = tape if tape is not None else _ACTIVE_TAPE.get()
    if tape is None:
        raise ContractViolation("backward() needs an active gradient tape")
    if loss.size != 1:
        raise ContractViolation(f"backward() needs a scalar loss, got shape {loss.shape}")

    seed = np.ones(loss.shape)
    record_allocation(seed.nbytes)
    grads: Dict[int, np.ndarray] = {id(loss): seed}
    produced = {id(node.output) for node in tape.nodes}
    leaves: Dict[int, Tensor] = {}
    if loss.grad_tracked and id(loss) not in produced:
        leaves[id(loss)] = loss

    for node in reversed(tape.nodes):
        upstream = grads.pop(id(node.output), None)
        if upstream is None:
            continue
        for tensor, grad in zip(node.inputs, node.backward(upstream)):
            if grad is None or not tensor.grad_tracked:
                continue
            if grad.shape != tensor.shape:
                raise ContractViolation(
                    f"{node.op} produced gradient of shape {grad.shape} for input {tensor.shape}"
                )
            key = id(tensor)
            if key in grads:
                grads[key] = grads[key] + grad
            else:
                grads[key] = grad
            record_allocation(grad.nbytes)
            if key not in produced:
                leaves[key] = tensor

    result = {key: (tensor, grads[key]) for key, tensor in leaves.items() if key in grads}
    logger.debug(f"backward replayed {len(tape.nodes)} nodes, {len(result)} leaf gradients")
    tape.clear()
    return Gradients(result)
