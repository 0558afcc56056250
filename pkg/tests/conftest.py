import numpy as np
import pytest

from oscillab.lp import SpectralField


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(rng, dim, N, kmax=None):
    f = SpectralField.from_values(rng.standard_normal((N,) * dim))
    return f.band_limit(kmax if kmax is not None else N / 3.0)
