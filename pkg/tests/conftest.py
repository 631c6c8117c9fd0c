import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240531)


def unit_vectors(d: int):
    """Hypothesis strategy for points of S^d (rejects near-zero draws)."""
    from hypothesis import strategies as st
    coord = st.floats(-1.0, 1.0, allow_nan=False)
    return (st.lists(coord, min_size=d + 1, max_size=d + 1)
            .map(np.array)
            .filter(lambda v: np.linalg.norm(v) > 1e-3)
            .map(lambda v: v / np.linalg.norm(v)))
