"""Reverse-mode differentiation core: tensors and the recording tape.

Values are float64 numpy arrays. Operations (see ``ops``) record onto the
thread-local active tape when any input is tracked; ``Tape.backward`` then
replays the record in reverse, accumulating exact vector-Jacobian products.
A tape is single use: one backward per forward unless reset.
"""

from __future__ import annotations

import threading

import numpy as np

__all__ = ["Tensor", "Tape", "active_tape", "no_tape"]

_STATE = threading.local()


class Tensor:
    """A float64 buffer with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad", "_tracked")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._tracked = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of primitive operations for one reverse traversal."""

    def __init__(self):
        self._ops = []  # (output, inputs, backward_fn)
        self._used = False

    def __enter__(self):
        stack = getattr(_STATE, "stack", None)
        if stack is None:
            stack = _STATE.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _STATE.stack.pop()
        return False

    def record(self, output: Tensor, inputs, backward_fn):
        output._tracked = True
        self._ops.append((output, tuple(inputs), backward_fn))

    def reset(self):
        self._ops.clear()
        self._used = False

    def backward(self, output: Tensor):
        """Accumulate gradients of the scalar ``output`` into requires_grad
        tensors reachable through the recorded operations."""
        if self._used:
            raise RuntimeError("tape already consumed; reset() before reuse")
        if output.data.size != 1:
            raise ValueError("backward requires a scalar output")
        self._used = True
        grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
        for out, inputs, backward_fn in reversed(self._ops):
            upstream = grads.pop(id(out), None)
            if upstream is None:
                continue
            for tensor, grad in zip(inputs, backward_fn(upstream)):
                if grad is None or not tensor._tracked:
                    continue
                slot = grads.get(id(tensor))
                grads[id(tensor)] = grad if slot is None else slot + grad
            if out.requires_grad:
                out.grad = upstream if out.grad is None else out.grad + upstream
        for out, inputs, _ in self._ops:
            for tensor in inputs:
                if tensor.requires_grad and id(tensor) in grads:
                    pending = grads.pop(id(tensor))
                    tensor.grad = pending if tensor.grad is None else tensor.grad + pending


def active_tape() -> Tape | None:
    stack = getattr(_STATE, "stack", None)
    return stack[-1] if stack else None


class no_tape:
    """Context manager that suspends recording (fast inference path)."""

    def __enter__(self):
        stack = getattr(_STATE, "stack", None)
        if stack is None:
            stack = _STATE.stack = []
        stack.append(None)
        return self

    def __exit__(self, *exc):
        _STATE.stack.pop()
        return False
