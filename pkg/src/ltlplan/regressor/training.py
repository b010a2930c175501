"""Training for the formula-conditioned value network.

Targets are smooth satisfaction values of the clean trajectories, computed
once per (formula, trajectory) pair and clamped; inputs are forward-noised
trajectories at uniformly drawn diffusion steps with fresh noise every
batch. The formula set is split 80/20 into train/validation groups so
held-out generalization is measured on formulas never seen in training.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Adam, AdamHyper, Tape, Tensor, load_checkpoint, ops, save_checkpoint
from ..diffusion.model import Normalizer
from ..diffusion.schedule import NoiseSchedule
from ..labeling import LabelingConfig, label
from ..ltlf import Formula, SoftConfig, evaluate_soft_batch, format_formula
from .graph import formula_to_graph
from .model import ValueNet

__all__ = [
    "RegressorTrainConfig",
    "compute_targets",
    "train_value_net",
    "save_value_net",
    "load_value_net",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegressorTrainConfig:
    batch_size: int = 64
    steps: int = 6000
    learning_rate: float = 3e-4
    seed: int = 0
    train_fraction: float = 0.8
    target_clamp: float = 10.0
    soft: SoftConfig = field(default_factory=SoftConfig)
    val_every: int = 200

    def __post_init__(self):
        if not 0 < self.train_fraction <= 1:
            raise ValueError("train_fraction must be in (0, 1]")
        if self.target_clamp <= 0:
            raise ValueError("target_clamp must be positive")


def compute_targets(
    formulas: list[Formula],
    trajectories: np.ndarray,
    labeling: LabelingConfig,
    soft: SoftConfig = SoftConfig(),
    clamp: float = 10.0,
) -> np.ndarray:
    """Satisfaction values of clean trajectories, shape (F, n), clamped.

    Undefined evaluations (X past the final step) never occur for the
    sampler's grammar but would surface as an error here rather than a
    silent nan target.
    """
    sigmas = label(trajectories, labeling)
    out = np.empty((len(formulas), len(trajectories)))
    for row, formula in enumerate(formulas):
        values, valid = evaluate_soft_batch(formula, sigmas, 0, soft)
        if not valid.all():
            raise ValueError(f"formula {format_formula(formula)} undefined on some trajectories")
        out[row] = np.clip(values, -clamp, clamp)
    return out


def split_formulas(n_formulas: int, train_fraction: float, rng: np.random.Generator):
    order = rng.permutation(n_formulas)
    cut = max(1, int(round(train_fraction * n_formulas)))
    return np.sort(order[:cut]), np.sort(order[cut:])


def train_value_net(
    trajectories: np.ndarray,
    formulas: list[Formula],
    labeling: LabelingConfig,
    sched: NoiseSchedule,
    normalizer: Normalizer,
    cfg: RegressorTrainConfig = RegressorTrainConfig(),
    kind: str = "regressor",
    log_every: int = 0,
):
    """Returns (net, info) with train/val loss curves and the formula split.

    ``kind="classifier"`` trains the binary ablation on thresholded labels
    with cross-entropy instead of the l2 value regression.
    """
    data = np.asarray(trajectories, dtype=float)
    if data.ndim != 3 or data.shape[0] == 0:
        raise ValueError("dataset must be non-empty with shape (n, T+1, d)")
    if not formulas:
        raise ValueError("formula set must be non-empty")
    n, length, dim = data.shape
    rng = np.random.default_rng(cfg.seed)
    targets = compute_targets(formulas, data, labeling, cfg.soft, cfg.target_clamp)
    labels = (targets > 0).astype(float)
    if kind == "classifier" and (labels.min() == labels.max()):
        log.warning("binary classifier targets are a single class; training anyway")
    train_idx, val_idx = split_formulas(len(formulas), cfg.train_fraction, rng)
    graphs = [formula_to_graph(f) for f in formulas]
    x0 = normalizer.to_normalized(data).reshape(n, -1)

    net = ValueNet(length - 1, dim, len(labeling.props), sched, normalizer, kind=kind, rng=rng)
    opt = Adam(net.parameters(), AdamHyper(lr=cfg.learning_rate))
    train_losses: list[float] = []
    val_losses: list[tuple[int, float]] = []

    def batch_loss(f_idx: int, rows: np.ndarray, noise_rng) -> Tensor:
        i = int(noise_rng.integers(1, sched.n_steps + 1))
        a_bar = sched.alpha_bar(i)
        eps = noise_rng.standard_normal((len(rows), x0.shape[1]))
        x_i = np.sqrt(a_bar) * x0[rows] + np.sqrt(1.0 - a_bar) * eps
        pred = net.value_tensor(graphs[f_idx], Tensor(x_i), i)
        if kind == "classifier":
            return ops.sigmoid_bce(pred, Tensor(labels[f_idx, rows][:, None]))
        return ops.mse_loss(pred, Tensor(targets[f_idx, rows][:, None]))

    def validation_loss(step_seed: int) -> float:
        pool = val_idx if len(val_idx) else train_idx
        vrng = np.random.default_rng((cfg.seed, step_seed))
        total = 0.0
        for f_idx in pool:
            rows = vrng.integers(0, n, size=min(cfg.batch_size, n))
            total += float(batch_loss(int(f_idx), rows, vrng).data)
        return total / len(pool)

    for step in range(cfg.steps):
        f_idx = int(train_idx[rng.integers(len(train_idx))])
        rows = rng.integers(0, n, size=cfg.batch_size)
        opt.zero_grad()
        with Tape() as tape:
            loss = batch_loss(f_idx, rows, rng)
            tape.backward(loss)
        opt.step()
        train_losses.append(float(loss.data))
        if cfg.val_every and (step + 1) % cfg.val_every == 0:
            val_losses.append((step + 1, validation_loss(step + 1)))
            if log_every:
                log.info("value-net step %d val loss %.5f", step + 1, val_losses[-1][1])

    info = {
        "train_losses": train_losses,
        "val_losses": val_losses,
        "train_idx": train_idx,
        "val_idx": val_idx,
        "targets": targets,
    }
    return net, info


def save_value_net(path: str, net: ValueNet, prop_names: list[str], extra_metadata: dict | None = None):
    from .graph import NODE_KINDS, RELATIONS

    tensors = {name: t.data for name, t in net.params.items()}
    tensors["schedule_betas"] = net.sched.betas
    tensors["norm_center"] = net.normalizer.center
    tensors["norm_halfrange"] = net.normalizer.halfrange
    metadata = {
        "kind": net.kind,
        "horizon": net.horizon,
        "dim": net.dim,
        "props": list(prop_names),
        "relations": list(RELATIONS),
        "node_kinds": list(NODE_KINDS),
        "hidden": net.hidden,
        "depth": net.depth,
        "atom_dim": net.atom_dim,
        "traj_width": net.traj_width,
        "time_dim": net.time_dim,
    }
    if extra_metadata:
        metadata["extra"] = extra_metadata
    save_checkpoint(path, tensors, metadata)


def load_value_net(path: str) -> tuple[ValueNet, list[str]]:
    from .graph import NODE_KINDS, RELATIONS

    tensors, metadata = load_checkpoint(path)
    if metadata.get("kind") not in ("regressor", "classifier"):
        raise ValueError(f"{path} is not a value-net checkpoint")
    if tuple(metadata["relations"]) != RELATIONS or tuple(metadata["node_kinds"]) != NODE_KINDS:
        raise ValueError(f"{path}: incompatible formula vocabulary")
    sched = NoiseSchedule(tensors.pop("schedule_betas"))
    normalizer = Normalizer(tensors.pop("norm_center"), tensors.pop("norm_halfrange"))
    params = {name: Tensor(arr, requires_grad=True) for name, arr in tensors.items()}
    net = ValueNet(
        metadata["horizon"],
        metadata["dim"],
        len(metadata["props"]),
        sched,
        normalizer,
        kind=metadata["kind"],
        hidden=metadata["hidden"],
        depth=metadata["depth"],
        atom_dim=metadata["atom_dim"],
        traj_width=metadata["traj_width"],
        time_dim=metadata["time_dim"],
        params=params,
    )
    return net, list(metadata["props"])
