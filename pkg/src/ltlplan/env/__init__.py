from .maze import MazeSpec, astar, builtin_maze, open_maze, rooms_maze, u_maze
from .dataset import TrajectoryDataset, generate_dataset, load_dataset, save_dataset
from .rollout import ControllerConfig, RolloutResult, reward, rollout, rollout_batch
from .formulas import (
    FormulaTaskSet,
    base_templates,
    build_task_set,
    mark_feasibility,
    sample_until_formula,
)
from .benchmark import (
    MethodSpec,
    TrialProtocol,
    evaluate_benchmark,
    planning_satisfaction,
    run_cell,
    sample_endpoints,
    write_csv,
)
from .plot import render_svg, save_svg

__all__ = [
    "MazeSpec",
    "astar",
    "builtin_maze",
    "open_maze",
    "u_maze",
    "rooms_maze",
    "TrajectoryDataset",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "ControllerConfig",
    "RolloutResult",
    "rollout",
    "rollout_batch",
    "reward",
    "FormulaTaskSet",
    "base_templates",
    "build_task_set",
    "mark_feasibility",
    "sample_until_formula",
    "MethodSpec",
    "TrialProtocol",
    "planning_satisfaction",
    "run_cell",
    "evaluate_benchmark",
    "sample_endpoints",
    "write_csv",
    "render_svg",
    "save_svg",
]
