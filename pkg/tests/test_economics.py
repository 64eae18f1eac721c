import math

import pytest
from hypothesis import given, strategies as st

from growlight import economics
from growlight.economics import (
    EncodingError,
    LightSchedule,
    PowerModel,
    TariffPlan,
    TariffError,
    default_power_model,
    default_tariff,
    power_draw,
    schedule_cost,
    tariff_rate,
)

# hand-summed daily cost of a constant 1 kW load under the default plan:
# 7h*12 + 3h*25 + 7h*38 + 6h*25 + 1h*12
DAILY_1KW_CENTS = 587.0


def test_power_draw_all_off_is_zero():
    pm = PowerModel(red_watts_per_unit=0.2, blue_watts_per_unit=0.2)
    assert power_draw(pm, 0, 0) == 0.0


def test_power_draw_default_calibration_anchor():
    # 27.9206 cents over 15 days / 0.587 cents per W-day => 3.1710 W at (7,7)
    assert power_draw(default_power_model(), 7, 7) == pytest.approx(3.1710, abs=1e-4)


def test_power_draw_monotone():
    pm = default_power_model()
    assert power_draw(pm, 8, 7) >= power_draw(pm, 7, 7)


def test_power_draw_rejects_out_of_range():
    with pytest.raises(EncodingError):
        power_draw(default_power_model(), 11, 0)
    with pytest.raises(EncodingError):
        power_draw(default_power_model(), 0, -1)


def test_power_model_requires_blue_pricier_per_umol():
    with pytest.raises(ValueError):
        PowerModel(red_watts_per_unit=1.0, blue_watts_per_unit=0.5)


@pytest.mark.parametrize(
    "hour,rate",
    [(5, 12), (12, 38), (23, 12), (0, 12), (7, 25), (9, 25), (10, 38), (16, 38), (17, 25), (22, 25)],
)
def test_tariff_rate_bands(hour, rate):
    assert tariff_rate(default_tariff(), hour) == rate


def test_tariff_rejects_gap_and_overlap():
    with pytest.raises(TariffError):
        TariffPlan(bands=((0, 7, 12), (8, 24, 25)))
    with pytest.raises(TariffError):
        TariffPlan(bands=((0, 8, 12), (7, 24, 25)))
    with pytest.raises(TariffError):
        TariffPlan(bands=((0, 12, 12),))


@given(
    cuts=st.lists(st.integers(1, 23), min_size=0, max_size=5, unique=True),
    rates=st.lists(st.integers(1, 99), min_size=6, max_size=6),
)
def test_tariff_partition_property(cuts, rates):
    bounds = [0] + sorted(cuts) + [24]
    plan = TariffPlan(
        bands=tuple(
            (lo, hi, rates[i]) for i, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:]))
        )
    )
    for hour in range(24):
        matches = [b for b in plan.bands if b[0] <= hour < b[1]]
        assert len(matches) == 1
        assert tariff_rate(plan, hour) == matches[0][2]


def test_schedule_cost_all_off_zero_standby():
    pm = PowerModel(red_watts_per_unit=0.2, blue_watts_per_unit=0.2)
    s = LightSchedule(levels=((0, 0),) * 48)
    assert schedule_cost(pm, default_tariff(), s) == 0.0


def test_schedule_cost_constant_kilowatt_day():
    pm = PowerModel(red_watts_per_unit=0.0, blue_watts_per_unit=1e-9, standby_watts=1000.0)
    s = LightSchedule(levels=((0, 0),) * 24)
    assert schedule_cost(pm, default_tariff(), s) == pytest.approx(DAILY_1KW_CENTS)


def test_schedule_cost_baseline_anchor():
    s = LightSchedule(levels=((7, 7),) * 360)
    cost = schedule_cost(default_power_model(), default_tariff(), s)
    assert cost == pytest.approx(27.9206, abs=1e-3)


def test_schedule_cost_concatenation_linearity():
    pm = default_power_model()
    tp = default_tariff()
    first = LightSchedule(levels=((3, 2),) * 30)
    second = LightSchedule(levels=((9, 4),) * 20)
    combined = LightSchedule(levels=first.levels + second.levels)
    # the tail's phase offset: its hour i lands at absolute hour 30 + i
    rates = tp.hourly_rates()
    tail = sum(
        power_draw(pm, r, b) / 1000.0 * rates[(30 + i) % 24]
        for i, (r, b) in enumerate(second.levels)
    )
    assert schedule_cost(pm, tp, combined) == pytest.approx(
        schedule_cost(pm, tp, first) + tail, rel=1e-12
    )


def test_schedule_cost_phase_shift_ratio():
    pm = default_power_model()
    tp = default_tariff()

    def one_hour_on(hour):
        levels = [(0, 0)] * 24
        levels[hour] = (10, 10)
        return LightSchedule(levels=tuple(levels))

    c5 = schedule_cost(pm, tp, one_hour_on(5))
    c12 = schedule_cost(pm, tp, one_hour_on(12))
    assert c12 / c5 == pytest.approx(38.0 / 12.0, rel=1e-12)


@given(
    levels=st.lists(
        st.tuples(st.integers(0, 10), st.integers(0, 10)), min_size=1, max_size=48
    ),
    index=st.integers(0, 10_000),
    component=st.integers(0, 1),
)
def test_cost_monotone_in_levels(levels, index, component):
    pm = default_power_model()
    tp = default_tariff()
    s = LightSchedule(levels=tuple(levels))
    i = index % len(levels)
    bumped = list(levels)
    pair = list(bumped[i])
    if pair[component] == 10:
        return
    pair[component] += 1
    bumped[i] = tuple(pair)
    assert schedule_cost(pm, tp, LightSchedule(levels=tuple(bumped))) >= schedule_cost(pm, tp, s)


def test_schedule_validation():
    with pytest.raises(EncodingError):
        LightSchedule(levels=((11, 0),))


def test_config_round_trips(tmp_path):
    pm = PowerModel(red_watts_per_unit=0.3, blue_watts_per_unit=0.4, standby_watts=0.05)
    economics.save_power_model(pm, tmp_path / "power.json")
    assert economics.load_power_model(tmp_path / "power.json") == pm

    tp = default_tariff()
    economics.save_tariff(tp, tmp_path / "tariff.json")
    assert economics.load_tariff(tmp_path / "tariff.json") == tp

    s = LightSchedule(levels=((1, 2), (3, 4), (0, 10)))
    economics.save_schedule_csv(s, tmp_path / "sched.csv")
    assert economics.load_schedule_csv(tmp_path / "sched.csv") == s
