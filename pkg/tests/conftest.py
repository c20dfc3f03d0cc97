import numpy as np
import pytest

import latentscore as ls


@pytest.fixture
def make_instance():
    """Factory for seeded (spec, incomplete data, prior) triples."""

    def make(seed=0, n=3, c=2, n_samples=10, alpha=1.01):
        spec = ls.binary_spec(n, c)
        model = ls.generate_model(spec, ls.SeededStream(seed, 0))
        data = ls.strip_hidden(
            ls.sample_dataset(model, n_samples, ls.SeededStream(seed, 1)))
        prior = ls.PriorSet.symmetric(spec, alpha)
        return spec, data, prior

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20240915)
