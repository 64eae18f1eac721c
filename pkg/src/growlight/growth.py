"""Leaf-area growth model.

The growth law ties the hourly increase in leaf area to an exponent
produced by a regressor over lighting, nutrient and age features:

    L2 - L1 = exp(f(red, blue, EC, pH, t) * dt)

with f expressed per hour.  Two regressors are supported: ordinary least
squares on min-max scaled features, and a two-hidden-layer ReLU network
trained with Adam on MSE, with inverted dropout for regularization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

FEATURE_NAMES = ("red_ppfd", "blue_ppfd", "ec", "ph", "t_days")

RED_PPFD_MAX = 200.0
BLUE_PPFD_MAX = 100.0


class ConfigurationError(ValueError):
    pass


class FitError(RuntimeError):
    pass


class TrainingError(RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


@dataclass(frozen=True)
class GrowthFeatures:
    """Model inputs: average PPFD of each channel, nutrients and plant age."""

    red_ppfd: float
    blue_ppfd: float
    ec: float
    ph: float
    t_days: float

    def __post_init__(self):
        if not 0.0 <= self.red_ppfd <= RED_PPFD_MAX:
            raise ValueError(f"red_ppfd {self.red_ppfd} outside [0, {RED_PPFD_MAX}]")
        if not 0.0 <= self.blue_ppfd <= BLUE_PPFD_MAX:
            raise ValueError(f"blue_ppfd {self.blue_ppfd} outside [0, {BLUE_PPFD_MAX}]")
        if self.ec <= 0.0:
            raise ValueError("ec must be positive")
        if not 0.0 < self.ph < 14.0:
            raise ValueError("ph must lie in (0, 14)")
        if self.t_days < 0.0:
            raise ValueError("t_days must be non-negative")

    def as_array(self):
        return np.array(
            [self.red_ppfd, self.blue_ppfd, self.ec, self.ph, self.t_days],
            dtype=float,
        )


@dataclass(frozen=True)
class NormalizationRanges:
    """Per-feature (min, max) pairs for min-max scaling to [0, 1]."""

    red_ppfd: tuple = (0.0, 200.0)
    blue_ppfd: tuple = (0.0, 100.0)
    ec: tuple = (1600.0, 2000.0)
    ph: tuple = (6.4, 6.7)
    t_days: tuple = (0.0, 15.0)

    def __post_init__(self):
        for name in FEATURE_NAMES:
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigurationError(f"range for {name}: min {lo} >= max {hi}")

    def mins(self):
        return np.array([getattr(self, n)[0] for n in FEATURE_NAMES])

    def maxs(self):
        return np.array([getattr(self, n)[1] for n in FEATURE_NAMES])

    def contains(self, x):
        """Componentwise in-range mask for a raw feature array (..., 5)."""
        x = np.asarray(x, dtype=float)
        return (x >= self.mins()) & (x <= self.maxs())


@dataclass(frozen=True)
class GrowthSample:
    """One training window: features plus leaf area at both endpoints.

    Only positive-increase windows are representable since the regression
    target is ln(L2 - L1) / dt.
    """

    features: GrowthFeatures
    delta_t_hours: float
    leaf_area_start: float
    leaf_area_end: float

    def __post_init__(self):
        if self.delta_t_hours <= 0.0:
            raise ValueError("delta_t_hours must be positive")
        if self.leaf_area_end <= self.leaf_area_start:
            raise ValueError("leaf_area_end must exceed leaf_area_start")

    @property
    def target(self):
        """Growth exponent ln(L2 - L1) / dt, per hour."""
        return math.log(self.leaf_area_end - self.leaf_area_start) / self.delta_t_hours


@dataclass(frozen=True)
class FitMetrics:
    mse: float
    r_squared: float


@dataclass(frozen=True)
class NeuralHyper:
    hidden: tuple = (128, 64)
    dropout: float = 0.5
    epochs: int = 2000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8


@dataclass
class GrowthModel:
    """A fitted growth-exponent regressor.

    ``params`` is a list of arrays: for a linear model ``[coef (5,),
    intercept (1,)]``; for a neural model ``[W1, b1, W2, b2, W3, b3]``.
    """

    kind: str
    ranges: NormalizationRanges
    params: list
    hyper: NeuralHyper | None = None
    training_loss: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("linear", "neural"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        for p in self.params:
            if not np.all(np.isfinite(p)):
                raise ValueError("model parameters must be finite")
        if self.kind == "linear":
            if len(self.params) != 2 or self.params[0].shape != (5,):
                raise ValueError("linear model expects 5 coefficients + intercept")


def normalize_features(features, ranges):
    """Min-max scale a GrowthFeatures (or raw (..., 5) array) to [0, 1].

    Values outside the configured range are clamped.
    """
    if isinstance(features, GrowthFeatures):
        x = features.as_array()
    else:
        x = np.asarray(features, dtype=float)
    mins, maxs = ranges.mins(), ranges.maxs()
    return np.clip((x - mins) / (maxs - mins), 0.0, 1.0)


def _forward_normalized(model, xn, dropout_masks=None):
    """Forward pass over already-normalized inputs (N, 5) -> (N,)."""
    if model.kind == "linear":
        coef, intercept = model.params
        return xn @ coef + intercept[0]
    w1, b1, w2, b2, w3, b3 = model.params
    h1 = np.maximum(xn @ w1 + b1, 0.0)
    if dropout_masks is not None:
        h1 = h1 * dropout_masks[0]
    h2 = np.maximum(h1 @ w2 + b2, 0.0)
    if dropout_masks is not None:
        h2 = h2 * dropout_masks[1]
    return (h2 @ w3 + b3)[:, 0]


def forward_raw(model, x):
    """Growth exponents for a raw (N, 5) feature array (inference, no dropout)."""
    xn = normalize_features(x, model.ranges)
    return _forward_normalized(model, np.atleast_2d(xn))


def model_forward(model, features):
    """Growth exponent f (ln(cm^2)/hour) for one feature point."""
    return float(forward_raw(model, features.as_array())[0])


def predict_leaf_increase(model, features, delta_t_hours):
    """Leaf-area increase over delta_t_hours: exp(f * dt), always positive."""
    if delta_t_hours <= 0.0:
        raise ValueError("delta_t_hours must be positive")
    return math.exp(model_forward(model, features) * delta_t_hours)


def _design(samples, ranges):
    x = np.stack([s.features.as_array() for s in samples])
    y = np.array([s.target for s in samples])
    return normalize_features(x, ranges), y


def fit_linear(samples, ranges=None):
    """Ordinary least squares of the growth exponent on normalized features."""
    ranges = ranges or NormalizationRanges()
    samples = list(samples)
    if len(samples) < 6:
        raise FitError(f"need at least 6 samples, got {len(samples)}")
    xn, y = _design(samples, ranges)
    a = np.hstack([xn, np.ones((len(samples), 1))])
    if np.linalg.matrix_rank(a) < a.shape[1]:
        raise FitError("singular design matrix")
    theta, *_ = np.linalg.lstsq(a, y, rcond=None)
    return GrowthModel(
        kind="linear",
        ranges=ranges,
        params=[theta[:5], theta[5:6]],
    )


def init_neural_params(hidden, rng):
    """He-scaled random initialization for a 5 -> h1 -> h2 -> 1 network."""
    sizes = (5,) + tuple(hidden) + (1,)
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        params.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def loss_and_gradients(params, xn, y, dropout_masks=None):
    """MSE loss and its gradient w.r.t. every parameter array.

    ``dropout_masks`` are pre-scaled (inverted dropout) masks for the two
    hidden layers; pass None for a deterministic pass.
    """
    w1, b1, w2, b2, w3, b3 = params
    z1 = xn @ w1 + b1
    h1 = np.maximum(z1, 0.0)
    if dropout_masks is not None:
        h1 = h1 * dropout_masks[0]
    z2 = h1 @ w2 + b2
    h2 = np.maximum(z2, 0.0)
    if dropout_masks is not None:
        h2 = h2 * dropout_masks[1]
    pred = (h2 @ w3 + b3)[:, 0]
    resid = pred - y
    n = len(y)
    loss = float(np.mean(resid**2))

    d_pred = (2.0 / n) * resid[:, None]
    g_w3 = h2.T @ d_pred
    g_b3 = d_pred.sum(axis=0)
    d_h2 = d_pred @ w3.T
    if dropout_masks is not None:
        d_h2 = d_h2 * dropout_masks[1]
    d_z2 = d_h2 * (z2 > 0.0)
    g_w2 = h1.T @ d_z2
    g_b2 = d_z2.sum(axis=0)
    d_h1 = d_z2 @ w2.T
    if dropout_masks is not None:
        d_h1 = d_h1 * dropout_masks[0]
    d_z1 = d_h1 * (z1 > 0.0)
    g_w1 = xn.T @ d_z1
    g_b1 = d_z1.sum(axis=0)
    return loss, [g_w1, g_b1, g_w2, g_b2, g_w3, g_b3]


def fit_neural(samples, hyper=None, seed=0, ranges=None):
    """Train the two-hidden-layer ReLU regressor with full-batch Adam.

    Dropout is active only during training (inverted scaling), so the
    returned model needs no rescaling at inference.  Fully deterministic
    for a fixed seed.
    """
    hyper = hyper or NeuralHyper()
    ranges = ranges or NormalizationRanges()
    samples = list(samples)
    if not samples:
        raise FitError("empty training set")
    xn, y = _design(samples, ranges)
    rng = np.random.default_rng(seed)
    params = init_neural_params(hyper.hidden, rng)

    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    keep = 1.0 - hyper.dropout
    losses = []
    for epoch in range(hyper.epochs):
        if hyper.dropout > 0.0:
            masks = [
                (rng.random((len(y), h)) < keep) / keep
                for h in hyper.hidden
            ]
        else:
            masks = None
        loss, grads = loss_and_gradients(params, xn, y, masks)
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch}", epoch=epoch)
        for i, g in enumerate(grads):
            m[i] = hyper.beta1 * m[i] + (1 - hyper.beta1) * g
            v[i] = hyper.beta2 * v[i] + (1 - hyper.beta2) * g**2
            m_hat = m[i] / (1 - hyper.beta1 ** (epoch + 1))
            v_hat = v[i] / (1 - hyper.beta2 ** (epoch + 1))
            params[i] = params[i] - hyper.learning_rate * m_hat / (
                np.sqrt(v_hat) + hyper.adam_eps
            )
        # clean (dropout-free) loss after the update, for the training curve
        losses.append(loss_and_gradients(params, xn, y)[0])

    return GrowthModel(
        kind="neural",
        ranges=ranges,
        params=params,
        hyper=hyper,
        training_loss=losses,
    )


def evaluate(model, samples):
    """MSE and R^2 of predicted vs actual final leaf area (L1 + dL vs L2)."""
    samples = list(samples)
    if not samples:
        raise ValueError("empty evaluation set")
    x = np.stack([s.features.as_array() for s in samples])
    dts = np.array([s.delta_t_hours for s in samples])
    l1 = np.array([s.leaf_area_start for s in samples])
    l2 = np.array([s.leaf_area_end for s in samples])
    pred_l2 = l1 + np.exp(forward_raw(model, x) * dts)
    resid = pred_l2 - l2
    mse = float(np.mean(resid**2))
    ss_tot = float(np.sum((l2 - l2.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("R^2 undefined: actual leaf areas have zero variance")
    return FitMetrics(mse=mse, r_squared=1.0 - float(np.sum(resid**2)) / ss_tot)


@dataclass(frozen=True)
class SensitivityGrid:
    red_values: np.ndarray
    blue_values: np.ndarray
    delta_area: np.ndarray  # (len(red), len(blue)), hourly leaf-area increase
    argmax: tuple  # (red value, blue value) at the grid maximum


def sensitivity_grid(model, t_days, ec=1800.0, ph=6.5, red_steps=21, blue_steps=11):
    """Hourly leaf-area increase over the full red x blue intensity grid.

    Ties in the argmax break to the first cell in row-major (red-outer)
    order.
    """
    if red_steps < 2 or blue_steps < 2:
        raise ValueError("need at least 2 grid steps per axis")
    red = np.linspace(0.0, RED_PPFD_MAX, red_steps)
    blue = np.linspace(0.0, BLUE_PPFD_MAX, blue_steps)
    rr, bb = np.meshgrid(red, blue, indexing="ij")
    x = np.column_stack(
        [
            rr.ravel(),
            bb.ravel(),
            np.full(rr.size, ec),
            np.full(rr.size, ph),
            np.full(rr.size, t_days),
        ]
    )
    delta = np.exp(forward_raw(model, x)).reshape(red_steps, blue_steps)
    i, j = np.unravel_index(np.argmax(delta), delta.shape)
    return SensitivityGrid(
        red_values=red,
        blue_values=blue,
        delta_area=delta,
        argmax=(float(red[i]), float(blue[j])),
    )


# --- serialization ---------------------------------------------------------


def model_to_dict(model):
    d = {
        "kind": model.kind,
        "ranges": {n: list(getattr(model.ranges, n)) for n in FEATURE_NAMES},
        "shapes": [list(p.shape) for p in model.params],
        "parameters": [float(x) for p in model.params for x in p.ravel()],
    }
    if model.hyper is not None:
        h = model.hyper
        d["hyperparameters"] = {
            "hidden": list(h.hidden),
            "dropout": h.dropout,
            "epochs": h.epochs,
            "learning_rate": h.learning_rate,
            "beta1": h.beta1,
            "beta2": h.beta2,
            "adam_eps": h.adam_eps,
        }
    return d


def model_from_dict(d):
    ranges = NormalizationRanges(**{n: tuple(d["ranges"][n]) for n in FEATURE_NAMES})
    flat = np.array(d["parameters"], dtype=float)
    params = []
    off = 0
    for shape in d["shapes"]:
        size = int(np.prod(shape))
        params.append(flat[off : off + size].reshape(shape))
        off += size
    hyper = None
    if "hyperparameters" in d:
        h = dict(d["hyperparameters"])
        h["hidden"] = tuple(h["hidden"])
        hyper = NeuralHyper(**h)
    return GrowthModel(kind=d["kind"], ranges=ranges, params=params, hyper=hyper)


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
