"""LED panel power draw, time-of-use tariffs, and schedule energy cost.

Power draw is affine in the 0-10 intensity level of each channel.  The
default calibration anchors the (7,7) always-on 15-day cost at 27.9206
cents under the default tariff; red and blue levels then draw equal
watts, which makes blue twice as expensive per unit of irradiance since
a blue level step delivers half the PPFD of a red step.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

LEVEL_MAX = 10
RED_PPFD_PER_LEVEL = 20.0
BLUE_PPFD_PER_LEVEL = 10.0

HORIZON_HOURS = 360  # 15-day planning horizon


class EncodingError(ValueError):
    pass


class TariffError(ValueError):
    pass


@dataclass(frozen=True)
class PowerModel:
    red_watts_per_unit: float
    blue_watts_per_unit: float
    standby_watts: float = 0.0

    def __post_init__(self):
        if min(self.red_watts_per_unit, self.blue_watts_per_unit, self.standby_watts) < 0:
            raise ValueError("power coefficients must be non-negative")
        blue_per_umol = self.blue_watts_per_unit / BLUE_PPFD_PER_LEVEL
        red_per_umol = self.red_watts_per_unit / RED_PPFD_PER_LEVEL
        if not blue_per_umol > red_per_umol:
            raise ValueError("blue must cost more energy per umol/m2s than red")


@dataclass(frozen=True)
class TariffPlan:
    """Piecewise-constant hour-of-day pricing; bands must partition [0, 24)."""

    bands: tuple  # of (start_hour, end_hour, rate_cents_per_kwh)

    def __post_init__(self):
        bands = tuple(sorted(self.bands))
        object.__setattr__(self, "bands", bands)
        cursor = 0
        for start, end, rate in bands:
            if start != cursor:
                raise TariffError(f"gap or overlap at hour {cursor}")
            if end <= start:
                raise TariffError(f"empty band {start}-{end}")
            if rate <= 0:
                raise TariffError("rates must be positive")
            cursor = end
        if cursor != 24:
            raise TariffError(f"bands end at {cursor}, expected 24")

    def hourly_rates(self):
        """Rate for each hour of the day as a length-24 list."""
        rates = []
        for start, end, rate in self.bands:
            rates.extend([rate] * (end - start))
        return rates


@dataclass(frozen=True)
class LightSchedule:
    """Hourly (red level, blue level) pairs; level 0 means off."""

    levels: tuple  # of (r, b) int pairs

    def __post_init__(self):
        levels = tuple((int(r), int(b)) for r, b in self.levels)
        for r, b in levels:
            if not (0 <= r <= LEVEL_MAX and 0 <= b <= LEVEL_MAX):
                raise EncodingError(f"level ({r}, {b}) outside 0..{LEVEL_MAX}")
        object.__setattr__(self, "levels", levels)

    @property
    def horizon(self):
        return len(self.levels)


def default_tariff():
    """Tokyo-style day/night time-of-use plan (cents per kWh)."""
    return TariffPlan(bands=((0, 7, 12), (7, 10, 25), (10, 17, 38), (17, 23, 25), (23, 24, 12)))


def default_power_model(days=15, baseline_cost_cents=27.9206):
    """Power model calibrated to the reference always-on (7,7) cost.

    Watts per level step are split equally between channels, implying the
    2x blue-vs-red cost per umol/m2s noted above.
    """
    daily_cents_per_watt = sum(default_tariff().hourly_rates()) / 1000.0
    p77 = baseline_cost_cents / (days * daily_cents_per_watt)
    unit = p77 / 14.0
    return PowerModel(red_watts_per_unit=unit, blue_watts_per_unit=unit)


def power_draw(pm, r_level, b_level):
    """Panel wattage at the given channel levels."""
    if not (0 <= r_level <= LEVEL_MAX and 0 <= b_level <= LEVEL_MAX):
        raise EncodingError(f"level ({r_level}, {b_level}) outside 0..{LEVEL_MAX}")
    return pm.standby_watts + r_level * pm.red_watts_per_unit + b_level * pm.blue_watts_per_unit


def tariff_rate(tp, hour_of_day):
    if not 0 <= hour_of_day < 24:
        raise ValueError(f"hour {hour_of_day} outside [0, 24)")
    return tp.hourly_rates()[int(hour_of_day)]


def schedule_cost(pm, tp, schedule):
    """Total cost in cents; schedule hour 0 is 00:00 of day 1."""
    rates = tp.hourly_rates()
    return sum(
        power_draw(pm, r, b) / 1000.0 * rates[i % 24]
        for i, (r, b) in enumerate(schedule.levels)
    )


# --- config / file formats -------------------------------------------------


def load_tariff(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return TariffPlan(
        bands=tuple((b["start_hour"], b["end_hour"], b["rate"]) for b in doc["bands"])
    )


def save_tariff(tp, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"bands": [{"start_hour": s, "end_hour": e, "rate": r} for s, e, r in tp.bands]},
            fh,
            indent=1,
        )
        fh.write("\n")


def load_power_model(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return PowerModel(
        red_watts_per_unit=doc["red_watts_per_unit"],
        blue_watts_per_unit=doc["blue_watts_per_unit"],
        standby_watts=doc.get("standby_watts", 0.0),
    )


def save_power_model(pm, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "red_watts_per_unit": pm.red_watts_per_unit,
                "blue_watts_per_unit": pm.blue_watts_per_unit,
                "standby_watts": pm.standby_watts,
            },
            fh,
            indent=1,
        )
        fh.write("\n")


def save_schedule_csv(schedule, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["hour_index", "red_level", "blue_level"])
        for i, (r, b) in enumerate(schedule.levels):
            writer.writerow([i, r, b])


def load_schedule_csv(path):
    levels = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            levels.append((int(row["red_level"]), int(row["blue_level"])))
    return LightSchedule(levels=tuple(levels))
