"""Hourly roll-out of a lighting schedule through the growth model.

Each hour the decoded PPFD pair, the held nutrient state and the
fractional plant age feed the model; the leaf area advances by
exp(f * 1 h), so every step adds a strictly positive increment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import economics
from .growth import forward_raw


class SimulationError(RuntimeError):
    pass


class ComparisonError(ValueError):
    pass


DEFAULT_EC = 1800.0
DEFAULT_PH = 6.5
DEFAULT_INITIAL_AREA = 5.0


@dataclass
class SimulationResult:
    trajectory: np.ndarray  # length H+1, starting at L0
    final_leaf_area: float
    electricity_cost: float = 0.0
    revenue: float = 0.0
    profit: float = 0.0
    extrapolated: bool = False  # any feature fell outside the model's ranges


@dataclass(frozen=True)
class ComparisonReport:
    pct_improvement_leaf_area: float
    pct_improvement_cost: float  # positive = savings
    pct_improvement_profit: float


def schedule_features(schedule, ec=DEFAULT_EC, ph=DEFAULT_PH, start_hour=0):
    """Raw (H, 5) feature matrix for a schedule: PPFD, nutrients, age."""
    levels = np.asarray(schedule.levels, dtype=float)
    h = len(levels)
    hours = start_hour + np.arange(h)
    return np.column_stack(
        [
            levels[:, 0] * economics.RED_PPFD_PER_LEVEL,
            levels[:, 1] * economics.BLUE_PPFD_PER_LEVEL,
            np.full(h, ec),
            np.full(h, ph),
            hours / 24.0,
        ]
    )


def simulate_growth(
    model,
    schedule,
    initial_area=DEFAULT_INITIAL_AREA,
    ec=DEFAULT_EC,
    ph=DEFAULT_PH,
    start_hour=0,
):
    """Leaf-area trajectory only; cost/revenue are filled in by the caller.

    ``start_hour`` offsets the plant age, so a horizon can be simulated
    in pieces that agree with the single-shot roll-out.
    """
    if initial_area <= 0.0:
        raise ValueError("initial_area must be positive")
    if schedule.horizon == 0:
        return SimulationResult(
            trajectory=np.array([initial_area]), final_leaf_area=initial_area
        )
    x = schedule_features(schedule, ec, ph, start_hour)
    f = forward_raw(model, x)
    bad = np.flatnonzero(~np.isfinite(f))
    if bad.size:
        raise SimulationError(f"non-finite growth exponent at hour {bad[0]}")
    trajectory = initial_area + np.concatenate([[0.0], np.cumsum(np.exp(f))])
    return SimulationResult(
        trajectory=trajectory,
        final_leaf_area=float(trajectory[-1]),
        extrapolated=bool(np.any(~model.ranges.contains(x))),
    )


def evaluate_schedule(
    model,
    schedule,
    power_model,
    tariff,
    initial_area=DEFAULT_INITIAL_AREA,
    ec=DEFAULT_EC,
    ph=DEFAULT_PH,
    price_per_area=0.0,
    plants_per_panel=20,
):
    """Full roll-out: trajectory plus cost, revenue and profit."""
    result = simulate_growth(model, schedule, initial_area, ec, ph)
    result.electricity_cost = economics.schedule_cost(power_model, tariff, schedule)
    result.revenue = price_per_area * result.final_leaf_area * plants_per_panel
    result.profit = result.revenue - result.electricity_cost
    return result


def run_baseline(horizon=economics.HORIZON_HOURS):
    """Constant (7,7) always-on reference schedule."""
    return economics.LightSchedule(levels=((7, 7),) * horizon)


def _pct(proposed, baseline):
    if baseline == 0.0:
        raise ComparisonError("zero baseline denominator")
    return (proposed - baseline) / abs(baseline) * 100.0


def compare(proposed, baseline):
    """Percentage improvements; cost is sign-flipped so savings are positive."""
    return ComparisonReport(
        pct_improvement_leaf_area=_pct(proposed.final_leaf_area, baseline.final_leaf_area),
        pct_improvement_cost=-_pct(proposed.electricity_cost, baseline.electricity_cost),
        pct_improvement_profit=_pct(proposed.profit, baseline.profit),
    )
