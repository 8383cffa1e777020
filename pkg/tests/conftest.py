import numpy as np
import pytest

from upliftbench.data import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_dataset(
    n_treated: int,
    n_control: int,
    seed: int = 0,
    source_tag: str | None = None,
    visit_rate: float = 0.0,
) -> Dataset:
    """Small random dataset with the requested arm sizes."""
    rng = np.random.default_rng(seed)
    n = n_treated + n_control
    treatment = np.concatenate([np.ones(n_treated, np.int8), np.zeros(n_control, np.int8)])
    visit = (rng.random(n) < visit_rate).astype(np.int8)
    conversion = np.zeros(n, np.int8)
    return Dataset(
        rng.normal(size=(n, 4)),
        rng.integers(0, 50, size=(n, 8)),
        treatment,
        treatment,  # exposure mirrors treatment, keeping constraints clean
        visit,
        conversion,
        source_tag=source_tag,
    )


@pytest.fixture
def two_arm_dataset():
    return make_dataset(85, 15, seed=7, visit_rate=0.3)
