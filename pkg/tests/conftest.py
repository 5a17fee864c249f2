from __future__ import annotations

import numpy as np
import pytest

from lgpolymer.env import Environment, Window, sample_environment, stream


@pytest.fixture
def small_env() -> Environment:
    """4 lines x 10 columns, theta=1, fixed seed."""
    return sample_environment(1.0, Window(1, 10, 1, 4), 11)


@pytest.fixture
def medium_env() -> Environment:
    """6 lines x 12 columns, theta=1.3."""
    return sample_environment(1.3, Window(1, 12, 1, 6), 23)


def ones_env(cols: int, rows: int, theta: float = 1.0) -> Environment:
    """Deterministic all-ones weights (log 0): partition values count paths."""
    return Environment(
        theta=theta, window=Window(1, cols, 1, rows), log_weights=np.zeros((cols, rows))
    )


def rng_for(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(stream(seed, index)))
