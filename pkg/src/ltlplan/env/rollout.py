"""Point-mass waypoint tracking with wall sliding.

Two low-level controllers execute a planned trajectory:

* C1 advances the waypoint index every control tick regardless of
  proximity (the greedy strategy);
* C2 advances only once the agent is within a distance tolerance of the
  current waypoint, with a bounded tick budget and a timeout flag.

Both use the same critically damped point-mass dynamics with a velocity
clamp; wall contact zeroes the blocked axis (slide projection), so executed
paths never cross occupancy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..labeling import LabelingConfig, label
from ..ltlf import Formula, satisfies_batch, threshold_assignments
from .maze import MazeSpec

__all__ = ["ControllerConfig", "RolloutResult", "rollout", "rollout_batch", "reward", "slide_move"]


@dataclass(frozen=True)
class ControllerConfig:
    kind: str = "c2"  # "c1" | "c2"
    delta: float = 0.4  # C2 waypoint acceptance radius
    kp: float = 0.8
    kd: float = 1.8
    vmax: float = 0.45
    budget_factor: int = 4  # C2 tick budget as a multiple of the plan length

    def __post_init__(self):
        if self.kind not in ("c1", "c2"):
            raise ValueError("controller kind must be 'c1' or 'c2'")
        if self.delta <= 0 or self.vmax <= 0 or self.budget_factor < 1:
            raise ValueError("controller parameters out of range")


@dataclass
class RolloutResult:
    states: np.ndarray  # (ticks, 2) executed positions
    rewards: np.ndarray  # (ticks,)
    goal_reached: bool
    satisfied: bool | None
    timeout: bool
    reward_total: float


def slide_move(maze: MazeSpec, pos: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Per-axis move of a batch of points; blocked axes are dropped."""
    out = pos.copy()
    for axis in (0, 1):
        candidate = out.copy()
        candidate[:, axis] += delta[:, axis]
        blocked = ~maze.is_free(candidate)
        candidate[blocked, axis] = out[blocked, axis]
        out = candidate
    return out


def rollout_batch(
    plans: np.ndarray,
    maze: MazeSpec,
    controller: ControllerConfig = ControllerConfig(),
    goals: np.ndarray | None = None,
    goal_radius: float = 0.5,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Execute a batch of plans; returns (paths, goal_reached, timeout).

    ``paths`` has shape (B, ticks, 2) with ticks = T+1 for C1 and up to
    budget_factor * (T+1) for C2 (all chains recorded for the same number of
    ticks; finished chains hold position at their final waypoint).
    """
    plans = np.asarray(plans, dtype=float)[..., :2]
    batch, length = plans.shape[0], plans.shape[1]
    pos = plans[:, 0].copy()
    vel = np.zeros_like(pos)
    wp = np.ones(batch, dtype=int)  # first target is the next waypoint
    ticks = length if controller.kind == "c1" else controller.budget_factor * length
    recorded = np.empty((batch, ticks, 2))
    done_at = np.full(batch, -1)
    for tick in range(ticks):
        target = plans[np.arange(batch), np.minimum(wp, length - 1)]
        acc = controller.kp * (target - pos) - controller.kd * vel
        vel = vel + acc
        speed = np.linalg.norm(vel, axis=1, keepdims=True)
        vel = np.where(speed > controller.vmax, vel * controller.vmax / np.maximum(speed, 1e-12), vel)
        pos = slide_move(maze, pos, vel)
        recorded[:, tick] = pos
        if controller.kind == "c1":
            wp += 1
        else:
            close = np.linalg.norm(pos - target, axis=1) < controller.delta
            wp = wp + close.astype(int)
        finished = wp >= length
        done_at = np.where((done_at < 0) & finished, tick, done_at)
        if controller.kind == "c2" and finished.all():
            recorded = recorded[:, : tick + 1]
            break
    timeout = done_at < 0
    if goals is None:
        reached = np.zeros(batch, dtype=bool)
    else:
        dist = np.linalg.norm(recorded - np.asarray(goals)[:, None, :], axis=2)
        reached = (dist <= goal_radius).any(axis=1)
    return recorded, reached, timeout


def reward(path: np.ndarray, goal: np.ndarray, goal_radius: float = 0.5) -> float:
    """Sparse unconstrained reward: count of ticks spent within the goal."""
    dist = np.linalg.norm(np.asarray(path, float)[:, :2] - np.asarray(goal, float)[None, :2], axis=1)
    return float((dist <= goal_radius).sum())


def rollout(
    plan: np.ndarray,
    maze: MazeSpec,
    controller: ControllerConfig = ControllerConfig(),
    goal: np.ndarray | None = None,
    goal_radius: float = 0.5,
    formula: Formula | None = None,
    labeling: LabelingConfig | None = None,
) -> RolloutResult:
    """Execute one plan and score it on the executed (not planned) path."""
    goals = None if goal is None else np.asarray(goal, float)[None, :2]
    paths, reached, timeout = rollout_batch(plan[None], maze, controller, goals, goal_radius)
    path = paths[0]
    if goal is not None:
        rewards = (np.linalg.norm(path - np.asarray(goal)[None, :2], axis=1) <= goal_radius).astype(float)
    else:
        rewards = np.zeros(len(path))
    satisfied = None
    if formula is not None and labeling is not None:
        sigma = label(path, labeling)
        satisfied = bool(satisfies_batch(threshold_assignments(sigma)[None], formula, 0)[0])
    return RolloutResult(
        states=path,
        rewards=rewards,
        goal_reached=bool(reached[0]),
        satisfied=satisfied,
        timeout=bool(timeout[0]),
        reward_total=float(rewards.sum()),
    )
