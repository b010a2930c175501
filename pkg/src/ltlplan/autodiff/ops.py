"""Differentiable primitives over :class:`~ltlplan.autodiff.tensor.Tensor`.

Each primitive computes its forward value eagerly and, when a tape is active
and any input is tracked, records a closure producing exact vector-Jacobian
products for the backward sweep. Shapes are validated at construction time.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, active_tape

__all__ = [
    "constant",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "affine",
    "relu",
    "tanh",
    "sin",
    "cos",
    "reduce_sum",
    "mean",
    "mse_loss",
    "sigmoid_bce",
    "gather_rows",
    "concat",
    "input_gradient",
]


def constant(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _record(output, inputs, backward_fn):
    tape = active_tape()
    if tape is not None and any(t._tracked for t in inputs):
        tape.record(output, inputs, backward_fn)
    return output


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def add(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    out = Tensor(a.data + b.data)
    return _record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    out = Tensor(a.data - b.data)
    return _record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def neg(a) -> Tensor:
    a = constant(a)
    out = Tensor(-a.data)
    return _record(out, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    out = Tensor(a.data * b.data)
    return _record(
        out,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def matmul(a, b) -> Tensor:
    a, b = constant(a), constant(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data)
    return _record(out, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def affine(x, w, b) -> Tensor:
    """x @ w + b with b broadcast across rows."""
    return add(matmul(x, w), b)


def relu(a) -> Tensor:
    a = constant(a)
    out = Tensor(np.maximum(a.data, 0.0))
    return _record(out, (a,), lambda g: (g * (a.data > 0),))


def tanh(a) -> Tensor:
    a = constant(a)
    y = np.tanh(a.data)
    out = Tensor(y)
    return _record(out, (a,), lambda g: (g * (1.0 - y * y),))


def sin(a) -> Tensor:
    a = constant(a)
    out = Tensor(np.sin(a.data))
    return _record(out, (a,), lambda g: (g * np.cos(a.data),))


def cos(a) -> Tensor:
    a = constant(a)
    out = Tensor(np.cos(a.data))
    return _record(out, (a,), lambda g: (-g * np.sin(a.data),))


def reduce_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = constant(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _record(out, (a,), backward)


def mean(a) -> Tensor:
    a = constant(a)
    n = a.data.size
    out = Tensor(a.data.mean())
    return _record(out, (a,), lambda g: (np.broadcast_to(g / n, a.shape).copy(),))


def mse_loss(pred, target) -> Tensor:
    pred, target = constant(pred), constant(target)
    if pred.shape != target.shape:
        raise ValueError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    out = Tensor(np.array(np.mean(diff * diff)))
    n = diff.size
    return _record(out, (pred, target), lambda g: (g * 2.0 * diff / n, -g * 2.0 * diff / n))


def sigmoid_bce(logits, labels) -> Tensor:
    """Mean binary cross-entropy on logits, numerically stable."""
    logits, labels = constant(logits), constant(labels)
    z, y = logits.data, labels.data
    if z.shape != y.shape:
        raise ValueError(f"sigmoid_bce shape mismatch: {z.shape} vs {y.shape}")
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    out = Tensor(np.array(loss.mean()))
    n = z.size

    def backward(g):
        p = 1.0 / (1.0 + np.exp(-z))
        return (g * (p - y) / n, None)

    return _record(out, (logits, labels), backward)


def gather_rows(a, indices) -> Tensor:
    """Select rows of a 2-D tensor; backward scatter-adds."""
    a = constant(a)
    idx = np.asarray(indices, dtype=np.int64)
    if a.data.ndim != 2:
        raise ValueError("gather_rows expects a 2-D tensor")
    out = Tensor(a.data[idx])

    def backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, idx, g)
        return (grad,)

    return _record(out, (a,), backward)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [constant(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record(out, tuple(tensors), backward)


def input_gradient(fn, x: np.ndarray) -> np.ndarray:
    """Gradient of the scalar-valued ``fn`` at ``x`` w.r.t. ``x``.

    ``fn`` receives a tracked :class:`Tensor` and must return a scalar
    Tensor built from the primitives in this module.
    """
    from .tensor import Tape

    xt = Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)
    with Tape() as tape:
        out = fn(xt)
        if out.data.size != 1:
            raise ValueError("input_gradient requires a scalar output")
        tape.backward(out)
    return xt.grad if xt.grad is not None else np.zeros_like(xt.data)
