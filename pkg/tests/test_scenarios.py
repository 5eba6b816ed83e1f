from datetime import date

import numpy as np
import pytest

from psps.errors import (
    InsufficientHistory,
    ParseError,
    ValidationError,
    ZeroTotal,
)
from psps.risk import ReliabilityTable, WFPI
from psps.scenarios import (
    DAY_AHEAD,
    FAN_PROBABILITIES,
    HistoryDay,
    Scenario,
    ScenarioSet,
    expected_scenario,
    gaussian_fan,
    load_history,
    load_scenario_set,
    match_risk_day,
    project_demand,
    reduce_scenarios,
    save_scenario_set,
)

SCN_SEED = 908311


def make_table(edges, owips, metric=WFPI):
    bins = tuple((edges[i], edges[i + 1], owips[i]) for i in range(len(owips)))
    return ReliabilityTable(metric=metric, bins=bins)


def day(d, curve, risk=0.0, metrics=None):
    return HistoryDay(date=date.fromisoformat(d),
                      total_demand_curve=tuple(curve),
                      cumulative_bus_risk=risk,
                      per_line_metric=metrics or {})


# -- backward reduction --------------------------------------------------------


def test_reduce_duplicate_days_collapse():
    days = [day("2021-07-01", [50, 60]), day("2021-07-02", [50, 60])]
    survivors, probs = reduce_scenarios(days, 1)
    assert len(survivors) == 1
    assert probs == [1.0]


def test_reduce_keep_all_is_uniform():
    days = [day(f"2021-07-0{i}", [50 + i, 60 + i]) for i in range(1, 5)]
    survivors, probs = reduce_scenarios(days, 4)
    assert survivors == days
    assert probs == [0.25] * 4


def test_reduce_two_clusters():
    rng = np.random.default_rng(SCN_SEED)
    days = []
    for i in range(5):
        jitter = rng.uniform(-0.5, 0.5, size=4)
        days.append(day(f"2021-07-0{i + 1}",
                        np.array([100, 120, 110, 105]) + jitter, risk=5.0))
    for i in range(5):
        jitter = rng.uniform(-0.5, 0.5, size=4)
        days.append(day(f"2021-07-1{i}",
                        np.array([200, 240, 220, 210]) + jitter, risk=50.0))
    survivors, probs = reduce_scenarios(days, 2)
    assert len(survivors) == 2
    lows = [s for s in survivors if s.total_demand_curve[0] < 150]
    assert len(lows) == 1
    assert probs == pytest.approx([0.5, 0.5])


def test_reduce_probability_floor():
    rng = np.random.default_rng(SCN_SEED + 1)
    days = [day(f"2021-08-{i + 1:02d}", rng.uniform(50, 150, size=6),
                risk=float(rng.uniform(0, 40))) for i in range(12)]
    survivors, probs = reduce_scenarios(days, 3)
    assert len(survivors) == 3
    assert sum(probs) == pytest.approx(1.0, abs=1e-12)
    assert min(probs) >= 1.0 / 12 - 1e-12


def test_reduce_insufficient():
    days = [day("2021-07-01", [50, 60])]
    with pytest.raises(InsufficientHistory):
        reduce_scenarios(days, 2)
    with pytest.raises(InsufficientHistory):
        reduce_scenarios(days, 0)


# -- gaussian fan ---------------------------------------------------------------


def test_fan_constant_history():
    days = [day(f"2021-07-0{i}", [100, 110, 105]) for i in range(1, 4)]
    fan = gaussian_fan(days)
    assert fan.kind == DAY_AHEAD
    assert len(fan.scenarios) == 5
    for s in fan.scenarios:
        assert s.total_demand == (100.0, 110.0, 105.0)


def test_fan_curve_arithmetic():
    days = [day("2021-07-01", [90, 90]), day("2021-07-02", [100, 100]),
            day("2021-07-03", [110, 110])]
    fan = gaussian_fan(days)
    levels = [s.total_demand[0] for s in fan.scenarios]
    assert levels == pytest.approx([80, 90, 100, 110, 120])


def test_fan_probabilities():
    assert sum(FAN_PROBABILITIES) == pytest.approx(1.0, abs=1e-12)
    assert FAN_PROBABILITIES[0] == pytest.approx(0.0668, abs=5e-5)
    assert FAN_PROBABILITIES[1] == pytest.approx(0.2417, abs=5e-5)
    assert FAN_PROBABILITIES[2] == pytest.approx(0.3829, abs=5e-5)
    assert FAN_PROBABILITIES[1] == FAN_PROBABILITIES[3]
    assert FAN_PROBABILITIES[0] == FAN_PROBABILITIES[4]


def test_fan_clip_at_zero():
    days = [day("2021-07-01", [5, 100]), day("2021-07-02", [10, 100]),
            day("2021-07-03", [15, 100])]
    fan = gaussian_fan(days)
    assert fan.scenarios[0].total_demand[0] == 0.0  # 10 - 2*5 clipped


def test_fan_with_network_and_table(toy3):
    table = make_table([0.0, 50.0, 100.0, 150.0], [0.0, 2e-6, 4e-6])
    days = [
        day("2021-07-01", [40, 55, 50], risk=20.0,
            metrics={1: 10.0, 2: 10.0}),
        day("2021-07-02", [50, 65, 60], risk=70.0,
            metrics={1: 60.0, 2: 10.0}),
        day("2021-07-03", [60, 75, 70], risk=130.0,
            metrics={1: 120.0, 2: 10.0}),
    ]
    fan = gaussian_fan(days, net=toy3, table=table)
    for s in fan.scenarios:
        assert set(s.demand) == {1, 2}
        for t in range(3):
            total = sum(s.demand[d][t] for d in s.demand)
            assert total == pytest.approx(s.total_demand[t])
        assert set(s.line_risk) == {1, 2}
    # low-risk fan points match the low-risk day, high match high
    assert fan.scenarios[0].line_risk[1] == 0.0        # metric 10 -> first bin
    assert fan.scenarios[4].line_risk[1] == 4e-6       # metric 120


def test_fan_tree_probability_mode():
    days = [day(f"2021-07-0{i}", [100 + i, 90 + i]) for i in range(1, 6)]
    fan = gaussian_fan(days, fan_probability_mode="tree")
    assert [s.probability for s in fan.scenarios] == pytest.approx([0.2] * 5)
    with pytest.raises(ValueError):
        gaussian_fan(days, fan_probability_mode="bogus")


def test_fan_insufficient_history():
    with pytest.raises(InsufficientHistory):
        gaussian_fan([day("2021-07-01", [100, 100])])


# -- risk day matching ----------------------------------------------------------


def test_match_risk_day_rules():
    d1 = day("2021-07-01", [1], risk=10.0)
    d2 = day("2021-07-02", [1], risk=20.0)
    assert match_risk_day(20.0, [d1, d2]) is d2
    assert match_risk_day(14.0, [d1, d2]) is d1
    assert match_risk_day(15.0, [d1, d2]) is d1  # tie -> earlier date
    with pytest.raises(InsufficientHistory):
        match_risk_day(1.0, [])


# -- demand projection -----------------------------------------------------------


def test_project_demand_split(toy3):
    out = project_demand([65.0, 130.0, 13.0], toy3)
    # toy3 peaks: demand 1 -> 40, demand 2 -> 25
    assert out[1] == pytest.approx((40.0, 80.0, 8.0))
    assert out[2] == pytest.approx((25.0, 50.0, 5.0))
    for t in range(3):
        assert out[1][t] + out[2][t] == pytest.approx([65.0, 130.0, 13.0][t])


def test_project_demand_zero_total(toy3):
    with pytest.raises(ZeroTotal):
        project_demand([0.0, 0.0, 0.0], toy3)


# -- expected scenario -----------------------------------------------------------


def test_expected_single_scenario_is_itself():
    s = Scenario(id=0, probability=1.0, demand={1: (10.0, 20.0)},
                 line_risk={1: 0.3}, total_demand=(10.0, 20.0))
    ev = expected_scenario(ScenarioSet(scenarios=(s,), kind=DAY_AHEAD))
    assert ev.demand == s.demand
    assert ev.line_risk == s.line_risk
    assert ev.probability == 1.0


def test_expected_scenario_means():
    a = Scenario(id=0, probability=0.5, demand={1: (10.0,)},
                 line_risk={1: 0.2}, total_demand=(10.0,))
    b = Scenario(id=1, probability=0.5, demand={1: (30.0,)},
                 line_risk={1: 0.4}, total_demand=(30.0,))
    ev = expected_scenario(ScenarioSet(scenarios=(a, b), kind=DAY_AHEAD))
    assert ev.line_risk[1] == pytest.approx(0.3)
    assert ev.demand[1][0] == pytest.approx(20.0)


def test_expected_of_fan_is_mean_curve(toy3):
    days = [day("2021-07-01", [60, 70, 65]), day("2021-07-02", [80, 90, 85]),
            day("2021-07-03", [70, 80, 75])]
    fan = gaussian_fan(days, net=toy3)
    ev = expected_scenario(fan)
    assert ev.total_demand == pytest.approx((70.0, 80.0, 75.0), rel=1e-9)


def test_expected_scenario_scaling_commutes(toy3):
    days = [day("2021-07-01", [60, 70, 65]), day("2021-07-02", [80, 90, 85]),
            day("2021-07-03", [70, 80, 75])]
    fan = gaussian_fan(days, net=toy3)
    ev = expected_scenario(fan)
    scaled = ScenarioSet(scenarios=tuple(
        Scenario(id=s.id, probability=s.probability,
                 demand={k: tuple(3.0 * x for x in v)
                         for k, v in s.demand.items()},
                 line_risk=s.line_risk,
                 total_demand=tuple(3.0 * x for x in s.total_demand))
        for s in fan.scenarios), kind=DAY_AHEAD)
    ev3 = expected_scenario(scaled)
    for k in ev.demand:
        assert ev3.demand[k] == pytest.approx(
            tuple(3.0 * x for x in ev.demand[k]), rel=1e-12)


# -- validation and persistence ---------------------------------------------------


def test_scenario_set_probability_check():
    s = Scenario(id=0, probability=0.5, demand={}, line_risk={})
    with pytest.raises(ValidationError, match="sum"):
        ScenarioSet(scenarios=(s,), kind=DAY_AHEAD)
    with pytest.raises(ValidationError, match="kind"):
        ScenarioSet(scenarios=(), kind="weekly")


def test_history_round_trip(tmp_path):
    dem = tmp_path / "demand.csv"
    dem.write_text("date,step,total_demand\n"
                   "2021-07-02,1,55\n2021-07-02,2,60\n"
                   "2021-07-01,1,50\n2021-07-01,2,58\n")
    lin = tmp_path / "lines.csv"
    lin.write_text("date,line_id,value\n"
                   "2021-07-01,1,30\n2021-07-01,2,40\n"
                   "2021-07-02,1,10\n2021-07-02,2,15\n")
    days = load_history(dem, lin)
    assert [d.date.isoformat() for d in days] == ["2021-07-01", "2021-07-02"]
    assert days[0].total_demand_curve == (50.0, 58.0)
    assert days[0].cumulative_bus_risk == pytest.approx(70.0)
    assert days[1].per_line_metric == {1: 10.0, 2: 15.0}


def test_history_errors(tmp_path):
    missing = tmp_path / "none.csv"
    with pytest.raises(ParseError):
        load_history(missing)
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("date,step,total_demand\n"
                      "2021-07-01,1,50\n2021-07-01,2,58\n2021-07-02,1,55\n")
    with pytest.raises(ValidationError, match="step counts"):
        load_history(ragged)
    bad = tmp_path / "bad.csv"
    bad.write_text("date,step,total_demand\n2021-07-01,one,50\n")
    with pytest.raises(ParseError):
        load_history(bad)


def test_scenario_set_json_round_trip(tmp_path, toy3):
    days = [day("2021-07-01", [60, 70, 65], risk=10.0, metrics={1: 20.0}),
            day("2021-07-02", [80, 90, 85], risk=30.0, metrics={1: 70.0}),
            day("2021-07-03", [70, 80, 75], risk=20.0, metrics={1: 40.0})]
    table = make_table([0.0, 50.0, 100.0, 150.0], [0.0, 2e-6, 4e-6])
    fan = gaussian_fan(days, net=toy3, table=table)
    p = tmp_path / "scn.json"
    save_scenario_set(fan, p)
    back = load_scenario_set(p)
    assert back.kind == fan.kind
    assert len(back.scenarios) == 5
    for s, b in zip(fan.scenarios, back.scenarios):
        assert b.probability == pytest.approx(s.probability)
        assert b.demand == s.demand
        assert b.line_risk == s.line_risk
