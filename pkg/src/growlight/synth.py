"""Synthetic growth-data generator.

The real cultivation dataset is not distributable, so tests and demos use
a hand-designed ground-truth exponent with the qualitative shape observed
on lettuce: growth rises with red intensity, blue light helps young
plants but loses value (and eventually hurts) as the plant ages, and
nutrient conductivity / pH have a mild quadratic sweet spot.  The
blue-age interaction and the quadratic terms are deliberately outside
the reach of a linear regression.
"""

from __future__ import annotations

import numpy as np

from .growth import GrowthFeatures, GrowthSample

_BASE = -0.6217
_RED_GAIN = 1.2167
_BLUE_GAIN_YOUNG = 1.6
_BLUE_COST_OLD = 1.6
_PH_PENALTY = 2.0
_EC_PENALTY = 0.05


def true_growth_exponent(red_ppfd, blue_ppfd, ec, ph, t_days):
    """Ground-truth growth exponent (per hour), vectorized over inputs."""
    u = np.asarray(red_ppfd, dtype=float) / 200.0
    v = np.asarray(blue_ppfd, dtype=float) / 100.0
    tau = np.asarray(t_days, dtype=float) / 15.0
    blue_coeff = _BLUE_GAIN_YOUNG - (_BLUE_GAIN_YOUNG + _BLUE_COST_OLD) * tau
    return (
        _BASE
        + _RED_GAIN * u
        + blue_coeff * v
        - _PH_PENALTY * (np.asarray(ph, dtype=float) - 6.5) ** 2
        - _EC_PENALTY * ((np.asarray(ec, dtype=float) - 1800.0) / 200.0) ** 2
    )


def make_samples(n, seed=0, delta_t_hours=1.0, noise=0.0):
    """Draw n samples with features uniform over the operating envelope.

    ``noise`` is the standard deviation of Gaussian noise added to the
    exponent before exponentiating (0 gives exactly recoverable targets).
    """
    rng = np.random.default_rng(seed)
    red = rng.uniform(20.0, 200.0, n)
    blue = rng.uniform(10.0, 100.0, n)
    ec = rng.uniform(1600.0, 2000.0, n)
    ph = rng.uniform(6.4, 6.7, n)
    t = rng.uniform(0.0, 15.0, n)
    l1 = rng.uniform(5.0, 400.0, n)
    f = true_growth_exponent(red, blue, ec, ph, t)
    if noise > 0.0:
        f = f + rng.normal(0.0, noise, n)
    dl = np.exp(f * delta_t_hours)
    return [
        GrowthSample(
            features=GrowthFeatures(red[i], blue[i], ec[i], ph[i], t[i]),
            delta_t_hours=delta_t_hours,
            leaf_area_start=l1[i],
            leaf_area_end=l1[i] + dl[i],
        )
        for i in range(n)
    ]


def train_test_samples(n_train=5000, n_test=1000, seed=0, noise=0.0):
    return (
        make_samples(n_train, seed=seed, noise=noise),
        make_samples(n_test, seed=seed + 1, noise=noise),
    )


def surrogate_model(seed=0):
    """A small dropout-free net fitted to the ground truth.

    Schedule-optimization tests need a fast, deterministic GrowthModel
    with the generator's qualitative shape; dropout is off since no
    regularization is needed against noiseless targets.
    """
    from .growth import NeuralHyper, fit_neural

    hyper = NeuralHyper(hidden=(32, 32), dropout=0.0, epochs=1500)
    return fit_neural(make_samples(3000, seed=seed), hyper, seed=seed)
