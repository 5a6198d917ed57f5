import numpy as np
import pytest
from hypothesis import settings

from abae_reviews.abae import AbaeModel

# first calls may trigger numba compilation or cache loads
settings.register_profile("default", deadline=None)
settings.load_profile("default")


def random_model(seed=0, V=12, d=4, K=3, scale=0.5):
    rng = np.random.default_rng(seed)
    E = rng.normal(size=(V, d))
    E /= np.linalg.norm(E, axis=1, keepdims=True)
    return AbaeModel(E=E, M=np.eye(d) + 0.3 * rng.normal(size=(d, d)),
                     W=scale * rng.normal(size=(K, d)), b=0.1 * rng.normal(size=K),
                     T=rng.normal(size=(K, d)))


@pytest.fixture
def model():
    return random_model()


def random_batch(rng, V, B=4, m=3, max_len=5):
    batch = [rng.integers(0, V, size=rng.integers(1, max_len + 1)).tolist() for _ in range(B)]
    negs = [[rng.integers(0, V, size=rng.integers(1, max_len + 1)).tolist() for _ in range(m)]
            for _ in range(B)]
    return batch, negs


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
