import numpy as np
import pytest

from litrain.synth import SynthConfig, gen_synthetic_dataset


@pytest.fixture(scope="session")
def tiny_dataset():
    """Small corpus shared by training-level tests; session-scoped, read-only."""
    cfg = SynthConfig(num_docs=40, num_queries=16, num_topics=4, seed=3)
    return gen_synthetic_dataset(cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_tokens(rng, n_rows, d, scale=1.0):
    return scale * rng.standard_normal((n_rows, d))
