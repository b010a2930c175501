"""Synthetic navigation datasets: roaming episodes cut into training windows.

Each episode starts at a random free position and repeatedly navigates to
random goals: the grid path comes from A*, the continuous motion from the
same point-mass tracking used at rollout time (so the data obeys the walls
by construction), with small acceleration noise for diversity. Episodes are
then re-cut into fixed-horizon windows with 50% overlap.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .maze import MazeSpec, astar
from .rollout import ControllerConfig, slide_move

__all__ = ["TrajectoryDataset", "generate_dataset", "save_dataset", "load_dataset"]

_FORMAT_VERSION = 1


@dataclass
class TrajectoryDataset:
    windows: np.ndarray  # (n, T+1, d)
    maze_name: str
    horizon: int

    def __post_init__(self):
        if self.windows.ndim != 3 or self.windows.shape[1] != self.horizon + 1:
            raise ValueError("windows must have shape (n, horizon+1, d)")


def _track_path(
    maze: MazeSpec,
    start: np.ndarray,
    waypoints: np.ndarray,
    rng: np.random.Generator,
    controller: ControllerConfig,
    noise: float,
    max_ticks: int,
) -> np.ndarray:
    pos = start[None].copy()
    vel = np.zeros_like(pos)
    states = [pos[0].copy()]
    wp = 0
    for _ in range(max_ticks):
        target = waypoints[min(wp, len(waypoints) - 1)][None]
        acc = controller.kp * (target - pos) - controller.kd * vel
        acc = acc + rng.normal(0.0, noise, size=acc.shape)
        vel = vel + acc
        speed = np.linalg.norm(vel, axis=1, keepdims=True)
        vel = np.where(speed > controller.vmax, vel * controller.vmax / np.maximum(speed, 1e-12), vel)
        pos = slide_move(maze, pos, vel)
        states.append(pos[0].copy())
        if np.linalg.norm(pos[0] - target[0]) < controller.delta:
            wp += 1
            if wp >= len(waypoints):
                break
    return np.array(states)


def generate_dataset(
    maze: MazeSpec,
    episodes: int,
    seed: int,
    legs_per_episode: int = 6,
    noise: float = 0.015,
    min_goal_distance: float | None = None,
    max_retries: int = 40,
    include_velocity: bool = False,
) -> TrajectoryDataset:
    """Roam the maze and cut fixed-horizon diffusion training windows."""
    rng = np.random.default_rng(seed)
    if min_goal_distance is None:
        min_goal_distance = 0.35 * max(maze.width, maze.height) * maze.cell
    controller = ControllerConfig(kind="c2", delta=0.45)
    horizon = maze.horizon
    pieces = []
    for _ in range(episodes):
        pos = maze.sample_free_position(rng)
        states = [pos.copy()]
        for _ in range(legs_per_episode):
            goal = None
            for _ in range(max_retries):
                candidate = maze.sample_free_position(rng)
                if np.linalg.norm(candidate - pos) < min_goal_distance:
                    continue
                path = astar(maze, np.floor(pos / maze.cell), np.floor(candidate / maze.cell))
                if path is not None:
                    goal = candidate
                    break
            if goal is None:
                raise RuntimeError("no reachable goal found; maze too constrained")
            waypoints = np.array([maze.cell_center(c) for c in path[1:]] + [goal])
            leg = _track_path(maze, pos, waypoints, rng, controller, noise,
                              max_ticks=12 * len(waypoints) + 40)
            states.extend(leg[1:])
            pos = states[-1]
        episode = np.array(states)
        stride = max(horizon // 2, 1)
        for offset in range(0, len(episode) - horizon, stride):
            pieces.append(episode[offset : offset + horizon + 1])
    windows = np.array(pieces)
    if include_velocity:
        velocity = np.diff(windows, axis=1, prepend=windows[:, :1])
        windows = np.concatenate([windows, velocity], axis=2)
    return TrajectoryDataset(windows=windows, maze_name=maze.name, horizon=horizon)


def save_dataset(path: str, dataset: TrajectoryDataset):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".npz.tmp")
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez(
                fh,
                version=_FORMAT_VERSION,
                windows=dataset.windows,
                maze_name=dataset.maze_name,
                horizon=dataset.horizon,
                norm_lo=dataset.windows.reshape(-1, dataset.windows.shape[-1]).min(axis=0),
                norm_hi=dataset.windows.reshape(-1, dataset.windows.shape[-1]).max(axis=0),
            )
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_dataset(path: str) -> TrajectoryDataset:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != _FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported dataset version {version}")
        return TrajectoryDataset(
            windows=np.asarray(data["windows"], dtype=float),
            maze_name=str(data["maze_name"]),
            horizon=int(data["horizon"]),
        )
