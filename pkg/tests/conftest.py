import numpy as np
import pytest

from ccnz import ComplexTensor, RawModel


def make_tensor(name, shape, rng, scale=1.0):
    n = int(np.prod(shape))
    vals = (rng.normal(0, scale, n) + 1j * rng.normal(0, scale, n)).astype(np.complex64)
    return ComplexTensor(name, tuple(shape), vals)


def make_model(rng, n_layers=3, max_extent=6, scale=1.0):
    layers = []
    for i in range(n_layers):
        rank = int(rng.integers(1, 4))
        shape = tuple(int(rng.integers(1, max_extent + 1)) for _ in range(rank))
        layers.append(make_tensor(f"layer{i}", shape, rng, scale=scale))
    return RawModel(layers)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
