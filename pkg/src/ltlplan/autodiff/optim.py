"""Adam optimizer, as a pure update rule plus a stateful convenience wrapper."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor

__all__ = ["AdamHyper", "adam_step", "Adam"]


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(param, grad, m, v, step: int, hyper: AdamHyper = AdamHyper()):
    """One Adam update. Returns (new_param, new_m, new_v); deterministic."""
    if not (param.shape == grad.shape == m.shape == v.shape):
        raise ValueError("adam_step shape mismatch")
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * grad
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * grad * grad
    m_hat = m / (1.0 - hyper.beta1**step)
    v_hat = v / (1.0 - hyper.beta2**step)
    param = param - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
    return param, m, v


class Adam:
    """Tracks first/second moments for a list of parameter tensors."""

    def __init__(self, params: list[Tensor], hyper: AdamHyper = AdamHyper()):
        self.params = list(params)
        self.hyper = hyper
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.step_count += 1
        for i, p in enumerate(self.params):
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            p.data, self._m[i], self._v[i] = adam_step(
                p.data, grad, self._m[i], self._v[i], self.step_count, self.hyper
            )
