"""Seeded benchmark harness: planning vs rollout satisfaction and reward.

Planning satisfaction always uses the boolean oracle on thresholded labels
of the generated plan (never the smooth evaluator, whose temperature would
leak into the score); rollout satisfaction applies the same oracle to the
path actually executed by the low-level controller. Methods sharing a
(formula, seed group) cell draw the same noise sequence and endpoints, so
comparisons are paired.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import atomic_write_bytes
from ..diffusion.model import Denoiser
from ..guidance import GuidanceConfig, SampleRequest, sample
from ..labeling import label
from ..ltlf import Formula, format_formula, satisfies_batch, threshold_assignments
from ..regressor.model import ValueNet
from .maze import MazeSpec
from .rollout import ControllerConfig, rollout_batch

__all__ = [
    "MethodSpec",
    "TrialProtocol",
    "planning_satisfaction",
    "sample_endpoints",
    "run_cell",
    "evaluate_benchmark",
    "write_csv",
]

CSV_COLUMNS = [
    "method",
    "split",
    "formula",
    "seed_group",
    "planning_sat",
    "rollout_sat",
    "reward",
    "feasible",
    "n_trials",
]


@dataclass(frozen=True)
class MethodSpec:
    name: str
    guidance: GuidanceConfig
    value_net: ValueNet | None = None


@dataclass(frozen=True)
class TrialProtocol:
    """How per-trial start/goal anchors are drawn."""

    endpoint_mode: str = "random"  # "random" | "hints"
    jitter: float = 0.25
    min_separation: float = 4.0
    goal_radius: float = 0.5
    avoid_regions: bool = True  # endpoints must start outside every region

    def __post_init__(self):
        if self.endpoint_mode not in ("random", "hints"):
            raise ValueError("endpoint_mode must be 'random' or 'hints'")


def planning_satisfaction(plans: np.ndarray, formula: Formula, labeling) -> np.ndarray:
    sigma = label(plans, labeling)
    return satisfies_batch(threshold_assignments(sigma), formula, 0)


def _inside_any_region(maze: MazeSpec, pos: np.ndarray) -> bool:
    sigma = label(pos[None], maze.labeling)
    return bool((sigma > 0).any())


def sample_endpoints(
    maze: MazeSpec, trials: int, rng: np.random.Generator, protocol: TrialProtocol
) -> tuple[np.ndarray, np.ndarray]:
    reject = (lambda p: _inside_any_region(maze, p)) if protocol.avoid_regions else None
    starts = np.empty((trials, 2))
    goals = np.empty((trials, 2))
    for k in range(trials):
        if protocol.endpoint_mode == "hints":
            if maze.start_hint is None or maze.goal_hint is None:
                raise ValueError(f"maze {maze.name!r} has no endpoint hints")
            starts[k] = _jitter(maze, np.asarray(maze.start_hint), protocol.jitter, rng, reject)
            goals[k] = _jitter(maze, np.asarray(maze.goal_hint), protocol.jitter, rng, reject)
        else:
            starts[k] = maze.sample_free_position(rng, reject=reject)
            far = lambda p: (reject is not None and reject(p)) or (
                np.linalg.norm(p - starts[k]) < protocol.min_separation
            )
            goals[k] = maze.sample_free_position(rng, reject=far)
    return starts, goals


def _jitter(maze, center, radius, rng, reject, max_tries: int = 200):
    for _ in range(max_tries):
        pos = center + rng.uniform(-radius, radius, size=2)
        if maze.is_free(pos[None])[0] and (reject is None or not reject(pos)):
            return pos
    return center


def run_cell(
    method: MethodSpec,
    formula: Formula,
    denoiser: Denoiser,
    maze: MazeSpec,
    trials: int,
    cell_seed,
    controller: ControllerConfig = ControllerConfig(),
    protocol: TrialProtocol = TrialProtocol(),
) -> dict:
    """One (method, formula, seed group) cell of the benchmark table."""
    env_rng = np.random.default_rng((*cell_seed, 17))
    starts, goals = sample_endpoints(maze, trials, env_rng, protocol)
    anchors = {0: starts, maze.horizon: goals}
    request = SampleRequest(
        count=trials,
        seed=(*cell_seed, 29),
        guidance=method.guidance,
        formula=formula,
        labeling=maze.labeling,
        anchors=anchors,
    )
    result = sample(request, denoiser, method.value_net)
    plans = result.trajectories
    planning = planning_satisfaction(plans, formula, maze.labeling)
    executed, _, _ = rollout_batch(plans, maze, controller, goals, protocol.goal_radius)
    rollout_sat = satisfies_batch(
        threshold_assignments(label(executed, maze.labeling)), formula, 0
    )
    dist = np.linalg.norm(executed - goals[:, None, :], axis=2)
    rewards = (dist <= protocol.goal_radius).sum(axis=1).astype(float)
    return {
        "planning_sat": float(planning.mean()),
        "rollout_sat": float(rollout_sat.mean()),
        "reward": float(rewards.mean()),
        "n_trials": trials,
        "plans": plans,
        "executed": executed,
    }


def evaluate_benchmark(
    methods: list[MethodSpec],
    tasks: list[dict],
    denoiser: Denoiser,
    maze: MazeSpec,
    groups: int = 10,
    trials: int = 100,
    base_seed: int = 0,
    controller: ControllerConfig = ControllerConfig(),
    protocol: TrialProtocol = TrialProtocol(),
) -> list[dict]:
    """Full metrics table.

    ``tasks`` entries are dicts with keys ``formula``, and optionally
    ``split`` and ``feasible``. Returns one row per (method, task, group),
    deterministic in (models, base_seed).
    """
    rows = []
    for task_idx, task in enumerate(tasks):
        formula = task["formula"]
        for method in methods:
            for group in range(groups):
                cell = run_cell(
                    method,
                    formula,
                    denoiser,
                    maze,
                    trials,
                    (base_seed, task_idx, group),
                    controller,
                    protocol,
                )
                rows.append(
                    {
                        "method": method.name,
                        "split": task.get("split", "all"),
                        "formula": format_formula(formula, maze.props),
                        "seed_group": group,
                        "planning_sat": cell["planning_sat"],
                        "rollout_sat": cell["rollout_sat"],
                        "reward": cell["reward"],
                        "feasible": bool(task.get("feasible", True)),
                        "n_trials": cell["n_trials"],
                    }
                )
    return rows


def write_csv(path: str, rows: list[dict]):
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in CSV_COLUMNS})
    atomic_write_bytes(path, buffer.getvalue().encode("utf-8"))
