import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mahaknn.synth import SynthConfig, generate


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_split():
    """A quick far-OOD train/test pair shared by read-only tests."""
    cfg = SynthConfig(
        seed=11, n_train=300, n_test_id=150, n_test_ood=150,
        M=4, K=3, d=8, class_sep=3.0, ood_shift=6.0,
    )
    return generate(cfg)


def random_spd(rng: np.random.Generator, d: int) -> np.ndarray:
    """Well-conditioned random SPD matrix."""
    A = rng.standard_normal((d, d))
    m = A @ A.T / d + 0.5 * np.eye(d)
    return (m + m.T) / 2
