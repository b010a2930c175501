from .schedule import NoiseSchedule, cosine_schedule
from .process import (
    dsm_target,
    forward_noise,
    inpaint_apply,
    posterior_coefficients,
    posterior_step,
    reverse_step,
    tweedie_estimate,
)
from .model import Denoiser, Normalizer, sinusoidal_embedding
from .sampling import sample_chain
from .training import TrainConfig, load_denoiser, save_denoiser, train_denoiser

__all__ = [
    "NoiseSchedule",
    "cosine_schedule",
    "forward_noise",
    "dsm_target",
    "tweedie_estimate",
    "reverse_step",
    "posterior_coefficients",
    "posterior_step",
    "inpaint_apply",
    "Denoiser",
    "Normalizer",
    "sinusoidal_embedding",
    "sample_chain",
    "TrainConfig",
    "train_denoiser",
    "save_denoiser",
    "load_denoiser",
]
