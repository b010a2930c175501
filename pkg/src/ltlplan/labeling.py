"""Differentiable labeling of trajectories against named spatial regions.

Each proposition is backed by a region in the plane; the label of a
proposition at a step is the signed margin of the trajectory position to the
region boundary, positive strictly inside. Circles use the classic
radius-minus-distance margin; axis-aligned rectangles use the negated signed
distance to the box.

Only the first two state columns (planar position) participate in labeling;
further columns (velocities etc.) are carried by trajectories but ignored
here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from .ltlf import PropSet

__all__ = ["Circle", "AxisRect", "Region", "LabelingConfig", "label", "label_jacobian"]


@dataclass(frozen=True)
class Circle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("circle radius must be positive")


@dataclass(frozen=True)
class AxisRect:
    lo: tuple[float, float]
    hi: tuple[float, float]

    def __post_init__(self):
        if not (self.lo[0] < self.hi[0] and self.lo[1] < self.hi[1]):
            raise ValueError("rect min corner must be strictly below max corner")


Region = Circle | AxisRect


@dataclass(frozen=True)
class LabelingConfig:
    """One region per proposition, in proposition order."""

    props: PropSet
    regions: tuple[Region, ...]

    def __post_init__(self):
        if len(self.regions) != len(self.props):
            raise ValueError("need exactly one region per proposition")


def _positions(states: np.ndarray) -> np.ndarray:
    arr = np.asarray(states, dtype=float)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[2] < 2:
        raise ValueError("states must have shape (T+1, d>=2) or (B, T+1, d>=2)")
    if not np.isfinite(arr).all():
        raise ValueError("trajectory states must be finite")
    return arr[:, :, :2]


def _circle_margin(pos: np.ndarray, region: Circle) -> np.ndarray:
    delta = pos - np.asarray(region.center)
    return region.radius - np.linalg.norm(delta, axis=-1)


def _rect_margin(pos: np.ndarray, region: AxisRect) -> np.ndarray:
    # Signed distance to the box, negated so inside is positive.
    lo = np.asarray(region.lo)
    hi = np.asarray(region.hi)
    q = np.maximum(lo - pos, pos - hi)  # componentwise; negative inside
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    inside = np.minimum(q.max(axis=-1), 0.0)
    return -(outside + inside)


def label(states: np.ndarray, cfg: LabelingConfig) -> np.ndarray:
    """Assignment matrix sigma of shape (|P|, T+1) for one trajectory.

    A batch (B, T+1, d) of trajectories yields (B, |P|, T+1). Positive
    entries mean the position is strictly inside the region.
    """
    batched = np.asarray(states).ndim == 3
    pos = _positions(states)
    rows = []
    for region in cfg.regions:
        if isinstance(region, Circle):
            rows.append(_circle_margin(pos, region))
        else:
            rows.append(_rect_margin(pos, region))
    sigma = np.stack(rows, axis=1)
    return sigma if batched else sigma[0]


def _circle_jacobian(pos: np.ndarray, region: Circle) -> np.ndarray:
    delta = pos - np.asarray(region.center)
    dist = np.linalg.norm(delta, axis=-1, keepdims=True)
    # The margin gradient at the center is any subgradient; zero avoids
    # spurious pushes at the (measure-zero) singularity.
    with np.errstate(invalid="ignore", divide="ignore"):
        grad = np.where(dist > 0, -delta / np.where(dist > 0, dist, 1.0), 0.0)
    return grad


def _rect_jacobian(pos: np.ndarray, region: AxisRect) -> np.ndarray:
    lo = np.asarray(region.lo)
    hi = np.asarray(region.hi)
    q = np.maximum(lo - pos, pos - hi)
    # dq_d/dp_d is -1 below the box center in that dimension, +1 above.
    sign = np.where(lo - pos > pos - hi, -1.0, 1.0)
    qp = np.maximum(q, 0.0)
    outside = np.linalg.norm(qp, axis=-1, keepdims=True)
    is_out = (outside > 0).squeeze(-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        grad_out = qp / np.where(outside > 0, outside, 1.0) * sign
    # Inside, only the least-deep dimension moves the margin.
    active = q.argmax(axis=-1)
    grad_in = np.zeros_like(q)
    idx = np.indices(active.shape)
    grad_in[(*idx, active)] = np.take_along_axis(sign, active[..., None], axis=-1).squeeze(-1)
    grad = np.where(is_out[..., None], grad_out, grad_in)
    return -grad


def label_jacobian(states: np.ndarray, cfg: LabelingConfig) -> np.ndarray:
    """Derivative of each label entry w.r.t. the position at its step.

    Shape (|P|, T+1, 2) for one trajectory, (B, |P|, T+1, 2) for a batch;
    entry (p, t) is d sigma[p, t] / d pos[t].
    """
    batched = np.asarray(states).ndim == 3
    pos = _positions(states)
    rows = []
    for region in cfg.regions:
        if isinstance(region, Circle):
            rows.append(_circle_jacobian(pos, region))
        else:
            rows.append(_rect_jacobian(pos, region))
    jac = np.stack(rows, axis=1)
    return jac if batched else jac[0]
