from .graph import NODE_KINDS, RELATIONS, FormulaGraph, formula_to_graph
from .model import ValueNet, embed_formula
from .training import (
    RegressorTrainConfig,
    compute_targets,
    load_value_net,
    save_value_net,
    train_value_net,
)

__all__ = [
    "NODE_KINDS",
    "RELATIONS",
    "FormulaGraph",
    "formula_to_graph",
    "ValueNet",
    "embed_formula",
    "RegressorTrainConfig",
    "compute_targets",
    "train_value_net",
    "save_value_net",
    "load_value_net",
]
