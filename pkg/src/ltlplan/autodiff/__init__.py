from .tensor import Tape, Tensor, active_tape, no_tape
from . import ops
from .ops import input_gradient
from .optim import Adam, AdamHyper, adam_step
from .checkpoint import (
    CheckpointError,
    atomic_write_bytes,
    load_checkpoint,
    metadata_hash,
    save_checkpoint,
)

__all__ = [
    "Tape",
    "Tensor",
    "active_tape",
    "no_tape",
    "ops",
    "input_gradient",
    "Adam",
    "AdamHyper",
    "adam_step",
    "CheckpointError",
    "atomic_write_bytes",
    "load_checkpoint",
    "metadata_hash",
    "save_checkpoint",
]
