"""Reverse-process sampling loop shared by every sampling mode.

The loop uses the posterior-mean parameterization: Tweedie estimate of the
clean trajectory, then the closed-form posterior step. Guidance plugs in as
an optional callback so that guided and unguided runs share one code path
and draw the identical noise sequence (guidance itself consumes no
randomness); with a zero-strength callback the outputs are bitwise equal to
the unguided ones.

The clean estimate is clamped to the normalized data range before the step;
early in the chain the score network extrapolates poorly and unclamped
estimates can blow up the largest-beta steps.
"""

from __future__ import annotations

import numpy as np

from .model import Denoiser
from .process import inpaint_apply, posterior_step, tweedie_estimate

__all__ = ["sample_chain"]


def sample_chain(
    denoiser: Denoiser,
    count: int,
    rng: np.random.Generator,
    anchors: dict[int, np.ndarray] | None = None,
    guidance_fn=None,
    clip_denoised: float = 1.0,
    return_normalized: bool = False,
) -> np.ndarray:
    """Draw ``count`` trajectories, shape (count, T+1, d), denormalized.

    ``anchors`` maps step index to plan-space state; anchored entries are
    re-imposed (scaled to the current noise level) after every step, so the
    returned trajectories match them exactly.

    ``guidance_fn(i, x_i, x0_hat, base)`` may return an adjusted base update
    for step i; it sees normalized-space tensors and must not draw random
    numbers.
    """
    sched = denoiser.sched
    shape = (count, denoiser.horizon + 1, denoiser.dim)
    anchors_norm = None
    if anchors:
        anchors_norm = {
            int(t): denoiser.normalizer.to_normalized(np.asarray(v, float)) for t, v in anchors.items()
        }
    x = rng.standard_normal(shape)
    if anchors_norm:
        x = inpaint_apply(x, anchors_norm, np.sqrt(sched.alpha_bar(sched.n_steps)))
    for i in range(sched.n_steps, 0, -1):
        score = denoiser.score(x, i)
        x0_hat = tweedie_estimate(x, i, score, sched)
        x0_step = np.clip(x0_hat, -clip_denoised, clip_denoised) if clip_denoised else x0_hat
        eps = rng.standard_normal(shape) if i > 1 else None
        base = posterior_step(x, i, x0_step, sched, eps)
        x = guidance_fn(i, x, x0_hat, base) if guidance_fn is not None else base
        if anchors_norm:
            x = inpaint_apply(x, anchors_norm, np.sqrt(sched.alpha_bar(i - 1)))
    return x if return_normalized else denoiser.normalizer.from_normalized(x)
