import numpy as np
import pytest

from mmdadapt.numerics import Subspace


def random_subspace(rng, d, k):
    q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    return Subspace(q, np.zeros(d))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
