"""Denoising-score-matching training loop and checkpoint I/O."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..autodiff import Adam, AdamHyper, Tape, Tensor, load_checkpoint, ops, save_checkpoint
from .model import Denoiser, Normalizer
from .process import forward_noise
from .schedule import NoiseSchedule

__all__ = ["TrainConfig", "train_denoiser", "save_denoiser", "load_denoiser"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    steps: int = 8000
    learning_rate: float = 2e-4
    seed: int = 0
    width: int = 256
    time_dim: int = 64
    blocks: int = 3

    def __post_init__(self):
        if min(self.batch_size, self.steps, self.width, self.time_dim) <= 0:
            raise ValueError("train config fields must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")


def train_denoiser(
    trajectories: np.ndarray,
    sched: NoiseSchedule,
    cfg: TrainConfig = TrainConfig(),
    log_every: int = 0,
) -> tuple[Denoiser, list[float]]:
    """Fit the score model on a dataset of clean trajectories (n, T+1, d).

    The loss is the mean squared error on eps residuals at uniformly sampled
    noise levels; deterministic under a fixed seed (single thread).
    """
    data = np.asarray(trajectories, dtype=float)
    if data.ndim != 3 or data.shape[0] == 0:
        raise ValueError("dataset must be non-empty with shape (n, T+1, d)")
    n, length, dim = data.shape
    if length < 2:
        raise ValueError("trajectories need at least two steps")
    rng = np.random.default_rng(cfg.seed)
    normalizer = Normalizer.fit(data)
    x0 = normalizer.to_normalized(data).reshape(n, -1)

    denoiser = Denoiser(
        horizon=length - 1,
        dim=dim,
        sched=sched,
        normalizer=normalizer,
        width=cfg.width,
        time_dim=cfg.time_dim,
        blocks=cfg.blocks,
        rng=rng,
    )
    opt = Adam(denoiser.parameters(), AdamHyper(lr=cfg.learning_rate))
    losses: list[float] = []
    for step in range(cfg.steps):
        idx = rng.integers(0, n, size=cfg.batch_size)
        i_steps = rng.integers(1, sched.n_steps + 1, size=cfg.batch_size)
        eps = rng.standard_normal((cfg.batch_size, x0.shape[1]))
        a_bar = np.array([sched.alpha_bar(int(i)) for i in i_steps])[:, None]
        x_i = np.sqrt(a_bar) * x0[idx] + np.sqrt(1.0 - a_bar) * eps
        opt.zero_grad()
        with Tape() as tape:
            pred = denoiser.eps_model(Tensor(x_i), i_steps)
            loss = ops.mse_loss(pred, Tensor(eps))
            tape.backward(loss)
        opt.step()
        losses.append(float(loss.data))
        if log_every and (step + 1) % log_every == 0:
            window = np.mean(losses[-log_every:])
            log.info("denoiser step %d loss %.5f", step + 1, window)
    return denoiser, losses


def save_denoiser(path: str, denoiser: Denoiser, extra_metadata: dict | None = None):
    tensors = {name: t.data for name, t in denoiser.params.items()}
    tensors["schedule_betas"] = denoiser.sched.betas
    tensors["norm_center"] = denoiser.normalizer.center
    tensors["norm_halfrange"] = denoiser.normalizer.halfrange
    metadata = {
        "kind": "denoiser",
        "horizon": denoiser.horizon,
        "dim": denoiser.dim,
        "width": denoiser.width,
        "time_dim": denoiser.time_dim,
        "blocks": denoiser.blocks,
    }
    if extra_metadata:
        metadata["extra"] = extra_metadata
    save_checkpoint(path, tensors, metadata)


def load_denoiser(path: str) -> Denoiser:
    tensors, metadata = load_checkpoint(path)
    if metadata.get("kind") != "denoiser":
        raise ValueError(f"{path} is not a denoiser checkpoint")
    sched = NoiseSchedule(tensors.pop("schedule_betas"))
    normalizer = Normalizer(tensors.pop("norm_center"), tensors.pop("norm_halfrange"))
    params = {name: Tensor(arr, requires_grad=True) for name, arr in tensors.items()}
    return Denoiser(
        horizon=metadata["horizon"],
        dim=metadata["dim"],
        sched=sched,
        normalizer=normalizer,
        width=metadata["width"],
        time_dim=metadata["time_dim"],
        blocks=metadata["blocks"],
        params=params,
    )
