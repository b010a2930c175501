import numpy as np
import pytest

from ltlplan.diffusion import TrainConfig, cosine_schedule, train_denoiser
from ltlplan.labeling import Circle, LabelingConfig
from ltlplan.ltlf import PropSet


class TinyWorld:
    """A quickly trained denoiser over straight-line paths in a 4x4 box,
    with two circular regions. Shared across guidance/regressor tests."""

    def __init__(self):
        rng = np.random.default_rng(1234)
        n, length = 512, 9
        starts = rng.uniform(0.2, 3.8, size=(n, 2))
        ends = rng.uniform(0.2, 3.8, size=(n, 2))
        ts = np.linspace(0, 1, length)[None, :, None]
        wobble = rng.normal(0, 0.03, size=(n, length, 2))
        self.trajectories = starts[:, None, :] * (1 - ts) + ends[:, None, :] * ts + wobble
        self.sched = cosine_schedule(16)
        self.denoiser, self.losses = train_denoiser(
            self.trajectories,
            self.sched,
            TrainConfig(batch_size=64, steps=1500, learning_rate=1e-3, seed=0, width=64),
        )
        self.props = PropSet(["p0", "p1"])
        self.labeling = LabelingConfig(
            self.props, (Circle((1.0, 1.0), 0.8), Circle((3.0, 3.0), 0.8))
        )


@pytest.fixture(scope="session")
def tiny_world():
    return TinyWorld()
