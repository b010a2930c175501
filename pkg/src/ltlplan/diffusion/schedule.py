"""Noise schedules for the discrete diffusion process.

Steps are indexed 1..N; ``alpha_bar(0) == 1`` by convention so that the
posterior coefficients at i = 1 are well defined.
"""

from __future__ import annotations

import numpy as np

__all__ = ["NoiseSchedule", "cosine_schedule"]


class NoiseSchedule:
    """Precomputed beta/alpha/alpha-bar tables.

    ``betas`` has shape (N,), entry j corresponding to step i = j + 1.
    The terminal alpha-bar must be near zero so the prior is a standard
    normal.
    """

    def __init__(self, betas):
        betas = np.asarray(betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size == 0:
            raise ValueError("betas must be a non-empty vector")
        if not ((betas > 0) & (betas < 1)).all():
            raise ValueError("betas must lie strictly inside (0, 1)")
        self.betas = betas
        self.n_steps = len(betas)
        self.alphas = 1.0 - betas
        self._alpha_bars = np.concatenate([[1.0], np.cumprod(self.alphas)])
        if not (np.diff(self._alpha_bars) < 0).all():
            raise ValueError("alpha_bar must be strictly decreasing")
        if self._alpha_bars[-1] >= 1e-2:
            raise ValueError(
                f"terminal alpha_bar {self._alpha_bars[-1]:.3g} too large; "
                "the prior would not be standard normal"
            )

    def alpha(self, i: int) -> float:
        self._check(i)
        return float(self.alphas[i - 1])

    def beta(self, i: int) -> float:
        self._check(i)
        return float(self.betas[i - 1])

    def alpha_bar(self, i: int) -> float:
        if not 0 <= i <= self.n_steps:
            raise IndexError(f"step {i} outside 0..{self.n_steps}")
        return float(self._alpha_bars[i])

    def _check(self, i: int):
        if not 1 <= i <= self.n_steps:
            raise IndexError(f"step {i} outside 1..{self.n_steps}")

    def __eq__(self, other):
        return isinstance(other, NoiseSchedule) and np.array_equal(self.betas, other.betas)


def cosine_schedule(n_steps: int = 64, offset: float = 0.008, max_beta: float = 0.999) -> NoiseSchedule:
    """Cosine alpha-bar schedule, robust at low step counts."""
    steps = np.arange(n_steps + 1, dtype=np.float64)
    f = np.cos((steps / n_steps + offset) / (1.0 + offset) * np.pi / 2.0) ** 2
    alpha_bar = f / f[0]
    betas = np.clip(1.0 - alpha_bar[1:] / alpha_bar[:-1], 1e-8, max_beta)
    return NoiseSchedule(betas)
