"""Shared fixtures: one tiny synthetic sequence reused across test modules."""

import numpy as np
import pytest

from pcodo.config import RunConfig
from pcodo.kitti_io import load_sequence
from pcodo.synth import generate_sequence

TINY_FRAMES = 6
TINY_POINTS = 3000
TINY_NOISE = 0.01
TINY_SEED = 3
TINY_STEP = 0.4


@pytest.fixture(scope="session")
def tiny_seq_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny") / "seq"
    generate_sequence(
        out,
        frames=TINY_FRAMES,
        points=TINY_POINTS,
        noise=TINY_NOISE,
        seed=TINY_SEED,
        step=TINY_STEP,
    )
    return out


@pytest.fixture(scope="session")
def tiny_sequence(tiny_seq_dir):
    return load_sequence(tiny_seq_dir)


@pytest.fixture(scope="session")
def tiny_config():
    return RunConfig().with_overrides(
        {"points": 384, "train_scans": 3, "ransac_iterations": 128, "seed": 1}
    )


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0.0:
        q[:, 0] = -q[:, 0]
    return q
