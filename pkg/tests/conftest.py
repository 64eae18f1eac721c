import numpy as np
import pytest

from growlight import economics, growth, synth


@pytest.fixture(scope="session")
def surrogate_model():
    """Deterministic growth model with the synthetic generator's shape."""
    return synth.surrogate_model(seed=0)


@pytest.fixture(scope="session")
def default_power():
    return economics.default_power_model()


@pytest.fixture(scope="session")
def default_tariff():
    return economics.default_tariff()


def make_random_neural(seed=0, hidden=(6, 5), scale=0.3):
    """A small random network for oracle-style checks."""
    rng = np.random.default_rng(seed)
    params = growth.init_neural_params(hidden, rng)
    params = [p * scale if p.ndim == 2 else rng.normal(0, 0.1, p.shape) for p in params]
    return growth.GrowthModel(
        kind="neural",
        ranges=growth.NormalizationRanges(),
        params=params,
        hyper=growth.NeuralHyper(hidden=hidden),
    )


def zero_neural(hidden=(4, 4)):
    """All-zero weights and biases: forward is identically 0."""
    sizes = (5,) + tuple(hidden) + (1,)
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        params.append(np.zeros((fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return growth.GrowthModel(
        kind="neural",
        ranges=growth.NormalizationRanges(),
        params=params,
        hyper=growth.NeuralHyper(hidden=hidden),
    )


def constant_model(value):
    """Linear model with zero slopes: forward returns ``value`` everywhere."""
    return growth.GrowthModel(
        kind="linear",
        ranges=growth.NormalizationRanges(),
        params=[np.zeros(5), np.array([float(value)])],
    )
