"""Score network: an MLP over the flattened trajectory with a sinusoidal
timestep embedding added after the first layer.

The network regresses the noise eps internally; the exposed ``score`` output
is the forward-kernel score -eps_hat / sqrt(1 - alpha_bar_i). Normalization
of trajectories into [-1, 1] is bundled so checkpoints are self-contained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, ops
from .schedule import NoiseSchedule

__all__ = ["Normalizer", "sinusoidal_embedding", "Denoiser", "mlp_params", "mlp_param_list"]


@dataclass(frozen=True)
class Normalizer:
    """Per-dimension affine map of states onto [-1, 1]."""

    center: np.ndarray
    halfrange: np.ndarray

    @classmethod
    def fit(cls, states: np.ndarray) -> "Normalizer":
        flat = np.asarray(states, float).reshape(-1, states.shape[-1])
        lo = flat.min(axis=0)
        hi = flat.max(axis=0)
        center = (hi + lo) / 2.0
        halfrange = np.maximum((hi - lo) / 2.0, 1e-8)
        return cls(center, halfrange)

    def to_normalized(self, states: np.ndarray) -> np.ndarray:
        return (np.asarray(states, float) - self.center) / self.halfrange

    def from_normalized(self, states: np.ndarray) -> np.ndarray:
        return np.asarray(states, float) * self.halfrange + self.center


def sinusoidal_embedding(steps, dim: int) -> np.ndarray:
    """Classic sin/cos positional features of diffusion step indices."""
    steps = np.atleast_1d(np.asarray(steps, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    angles = steps[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def mlp_params(rng: np.random.Generator, sizes: list[tuple[str, int, int]]) -> dict[str, Tensor]:
    """Xavier-initialized weight/bias tensors for the named layers."""
    params = {}
    for name, fan_in, fan_out in sizes:
        scale = np.sqrt(2.0 / (fan_in + fan_out))
        params[f"{name}_w"] = Tensor(rng.normal(0.0, scale, size=(fan_in, fan_out)), requires_grad=True)
        params[f"{name}_b"] = Tensor(np.zeros((1, fan_out)), requires_grad=True)
    return params


def mlp_param_list(params: dict[str, Tensor]) -> list[Tensor]:
    return [params[k] for k in sorted(params)]


class Denoiser:
    """Time-conditioned score model s(tau, i) over fixed-horizon trajectories.

    A residual MLP over the flattened trajectory: input projection with an
    added timestep embedding, ``blocks`` two-layer gated residual blocks,
    linear output head. Deeper residual stacks denoise far more crisply than
    a plain MLP at the same budget.
    """

    def __init__(
        self,
        horizon: int,
        dim: int,
        sched: NoiseSchedule,
        normalizer: Normalizer,
        width: int = 256,
        time_dim: int = 64,
        blocks: int = 3,
        rng: np.random.Generator | None = None,
        params: dict[str, Tensor] | None = None,
    ):
        self.horizon = horizon
        self.dim = dim
        self.sched = sched
        self.normalizer = normalizer
        self.width = width
        self.time_dim = time_dim
        self.blocks = blocks
        flat = (horizon + 1) * dim
        if params is not None:
            self.params = params
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            sizes = [("in", flat, width), ("time", time_dim, width), ("out", width, flat)]
            for b in range(blocks):
                sizes += [(f"blk{b}a", width, width), (f"blk{b}b", width, width)]
            self.params = mlp_params(rng, sizes)

    def parameters(self) -> list[Tensor]:
        return mlp_param_list(self.params)

    def _forward(self, x: Tensor, i_steps: np.ndarray) -> Tensor:
        # x: (B, (T+1)*d) normalized; returns predicted eps of the same shape.
        p = self.params
        h = ops.tanh(ops.affine(x, p["in_w"], p["in_b"]))
        emb = sinusoidal_embedding(i_steps, self.time_dim)
        h = ops.add(h, ops.affine(Tensor(emb), p["time_w"], p["time_b"]))
        for b in range(self.blocks):
            inner = ops.tanh(ops.affine(h, p[f"blk{b}a_w"], p[f"blk{b}a_b"]))
            h = ops.add(h, ops.tanh(ops.affine(inner, p[f"blk{b}b_w"], p[f"blk{b}b_b"])))
        return ops.affine(h, p["out_w"], p["out_b"])

    def eps_model(self, x: Tensor, i_steps) -> Tensor:
        """Tape-friendly eps prediction on flattened normalized input."""
        steps = np.broadcast_to(np.asarray(i_steps), (x.data.shape[0],))
        return self._forward(x, steps)

    def score(self, tau: np.ndarray, i: int) -> np.ndarray:
        """Score estimate for a batch (B, T+1, d) of normalized trajectories."""
        tau = np.asarray(tau, dtype=float)
        squeeze = tau.ndim == 2
        if squeeze:
            tau = tau[None]
        batch = tau.shape[0]
        flat = tau.reshape(batch, -1)
        eps_hat = self.eps_model(Tensor(flat), i).data
        out = -eps_hat / np.sqrt(1.0 - self.sched.alpha_bar(i))
        out = out.reshape(tau.shape)
        return out[0] if squeeze else out

    def score_tensor(self, tau_flat: Tensor, i: int) -> Tensor:
        """Score as a differentiable graph node (for network-Jacobian paths)."""
        eps_hat = self.eps_model(tau_flat, i)
        return ops.mul(eps_hat, -1.0 / np.sqrt(1.0 - self.sched.alpha_bar(i)))
