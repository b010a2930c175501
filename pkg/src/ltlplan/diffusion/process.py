"""Closed-form pieces of the diffusion process.

All functions are pure and operate on arrays shaped (..., T+1, d) or any
broadcast-compatible shape; the step index selects scalar schedule constants.
"""

from __future__ import annotations

import numpy as np

from .schedule import NoiseSchedule

__all__ = [
    "forward_noise",
    "dsm_target",
    "tweedie_estimate",
    "reverse_step",
    "posterior_coefficients",
    "posterior_step",
    "inpaint_apply",
]


def forward_noise(tau0: np.ndarray, i: int, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Corrupt a clean trajectory to noise level i: sqrt(a_bar) x0 + sqrt(1-a_bar) eps."""
    sched._check(i)
    tau0 = np.asarray(tau0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if tau0.shape != eps.shape:
        raise ValueError(f"noise shape {eps.shape} must match trajectory {tau0.shape}")
    a_bar = sched.alpha_bar(i)
    return np.sqrt(a_bar) * tau0 + np.sqrt(1.0 - a_bar) * eps


def dsm_target(tau0: np.ndarray, tau_i: np.ndarray, i: int, sched: NoiseSchedule) -> np.ndarray:
    """Score of the forward kernel, the denoising regression target.

    grad log q(tau_i | tau0) = -(tau_i - sqrt(a_bar) tau0) / (1 - a_bar),
    equal to -eps / sqrt(1 - a_bar) when tau_i came from forward_noise.
    """
    sched._check(i)
    a_bar = sched.alpha_bar(i)
    return -(np.asarray(tau_i, float) - np.sqrt(a_bar) * np.asarray(tau0, float)) / (1.0 - a_bar)


def tweedie_estimate(tau_i: np.ndarray, i: int, score: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Posterior-mean estimate of the clean trajectory from a noised one."""
    sched._check(i)
    a_bar = sched.alpha_bar(i)
    return (np.asarray(tau_i, float) + (1.0 - a_bar) * np.asarray(score, float)) / np.sqrt(a_bar)


def reverse_step(
    tau_i: np.ndarray, i: int, score: np.ndarray, sched: NoiseSchedule, eps: np.ndarray | None = None
) -> np.ndarray:
    """One unguided reverse step in the score-mean parameterization.

    Mean (tau_i + (1 - a_i) score) / sqrt(a_i), noise std sqrt(1 - a_i);
    the final step (i = 1) adds no noise.
    """
    sched._check(i)
    alpha = sched.alpha(i)
    mean = (np.asarray(tau_i, float) + (1.0 - alpha) * np.asarray(score, float)) / np.sqrt(alpha)
    if i == 1 or eps is None:
        return mean
    return mean + np.sqrt(1.0 - alpha) * np.asarray(eps, float)


def posterior_coefficients(sched: NoiseSchedule, i: int) -> tuple[float, float, float]:
    """(c_prev, c_clean, noise_std) of the posterior-mean reverse update.

    tau_{i-1} = c_prev tau_i + c_clean tau0_hat + noise_std eps. Identical,
    after substituting the Tweedie estimate, to the score-mean form of
    reverse_step for any score field.
    """
    sched._check(i)
    alpha = sched.alpha(i)
    a_bar = sched.alpha_bar(i)
    a_bar_prev = sched.alpha_bar(i - 1)
    c_prev = np.sqrt(alpha) * (1.0 - a_bar_prev) / (1.0 - a_bar)
    c_clean = np.sqrt(a_bar_prev) * (1.0 - alpha) / (1.0 - a_bar)
    return float(c_prev), float(c_clean), float(np.sqrt(1.0 - alpha))


def posterior_step(
    tau_i: np.ndarray,
    i: int,
    tau0_hat: np.ndarray,
    sched: NoiseSchedule,
    eps: np.ndarray | None = None,
) -> np.ndarray:
    """Posterior-mean reverse update given a clean-trajectory estimate.

    No noise is added at the final step (i = 1).
    """
    c_prev, c_clean, noise_std = posterior_coefficients(sched, i)
    out = c_prev * np.asarray(tau_i, float) + c_clean * np.asarray(tau0_hat, float)
    if i > 1 and eps is not None:
        out = out + noise_std * np.asarray(eps, float)
    return out


def inpaint_apply(traj: np.ndarray, anchors: dict[int, np.ndarray], scale: float = 1.0) -> np.ndarray:
    """Overwrite anchored steps with (scaled) anchor states.

    ``scale`` is sqrt(alpha_bar) of the current noise level so intermediate
    iterates keep anchors on-distribution; at level 0 the anchors are exact.
    """
    traj = np.array(traj, dtype=float, copy=True)
    horizon = traj.shape[-2]
    for step, value in anchors.items():
        if not 0 <= step < horizon:
            raise ValueError(f"anchor step {step} outside horizon {horizon - 1}")
        traj[..., step, :] = scale * np.asarray(value, dtype=float)
    return traj
