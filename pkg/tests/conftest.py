import numpy as np
import pytest

from levybool.calibrate import calibrate
from levybool.stable import StableParams


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@pytest.fixture(scope="session")
def constants_a15_d2():
    """Calibrated bound constants for alpha=1.5, d=2 (shared, small n)."""
    rng = make_rng(20_240_001)
    return calibrate(StableParams(1.5, 2), rng, n_escape=8000, n_hitting=8000)


@pytest.fixture
def rng():
    return make_rng(12345)
