import math
from dataclasses import replace

import numpy as np
import pytest

from psps.errors import (ConfigError, DimensionMismatch, ParseError,
                         ValidationError)
from psps.formulation import CommitmentPlan, solve_day_ahead
from psps.network import Bus, Demand, Generator, PowerNetwork
from psps.risk import LineRisk
from psps.rt import (
    UNIFORM_ONSET,
    WHOLE_DAY_ONSET,
    OutageScenario,
    average_available_generation,
    evaluate_plan,
    load_realized_demand,
    plan_end_status,
    realized_risk,
    receding_horizon_run,
    sample_outages,
    solve_recourse,
)
from psps.scenarios import DAY_AHEAD, Scenario, ScenarioSet

RT_SEED = 550124


def scn_set(*scenarios):
    return ScenarioSet(scenarios=tuple(scenarios), kind=DAY_AHEAD)


def base_scenario(net, sid=0, probability=1.0):
    demand = {d.id: tuple(d.base_profile) for d in net.demands}
    return Scenario(id=sid, probability=probability, demand=demand,
                    line_risk={}, total_demand=())


def line_risk_entry(line_id, pi, metric=0.0):
    if pi == 0.0:
        log_pi, log_q = -1e9, 0.0
    else:
        log_pi, log_q = math.log(pi), math.log1p(-pi)
    return LineRisk(line_id=line_id, pi=pi, log_pi=log_pi,
                    log_one_minus_pi=log_q, cells=(), metric_value=metric)


def all_on_plan(horizon, line_ids, gen_ids=(1,)):
    on = tuple([1] * horizon)
    start = tuple([1] + [0] * (horizon - 1))
    zero = tuple([0] * horizon)
    return CommitmentPlan(
        gen_on={g: on for g in gen_ids},
        gen_up={g: start for g in gen_ids},
        gen_dn={g: zero for g in gen_ids},
        line_on={l: on for l in line_ids},
        line_down={l: zero for l in line_ids})


def ramp_net(ramp_up=15.0, profile=(0.0, 40.0, 40.0, 40.0)):
    return PowerNetwork(
        buses=(Bus(id=1, name="only", latitude=34.0, longitude=-117.0),),
        lines=(),
        generators=(Generator(id=1, bus=1, p_min=0.0, p_max=50.0,
                              ramp_down=-50.0, ramp_up=ramp_up, min_up=1,
                              min_down=1, marginal_cost=10.0,
                              startup_cost=20.0, shutdown_cost=0.0,
                              initially_on=False),),
        demands=(Demand(id=1, bus=1, voll=1000.0, base_profile=profile),),
        horizon=len(profile), step_hours=1.0)


def day_ahead_toy3(toy3):
    return solve_day_ahead(toy3, scn_set(base_scenario(toy3)), budget=None)


# -- outage sampling -------------------------------------------------------------


def test_zero_risk_lines_never_fail():
    plan = all_on_plan(3, line_ids=(1, 2))
    risk = [line_risk_entry(1, 0.0), line_risk_entry(2, 0.0)]
    for scn in sample_outages(risk, plan, 20, RT_SEED):
        assert scn.availability == plan.line_on
        assert scn.probability == pytest.approx(1 / 20)


def test_certain_ignition_fails_every_sample():
    plan = all_on_plan(3, line_ids=(1,))
    risk = [line_risk_entry(1, 1.0 - 1e-12)]
    scns = sample_outages(risk, plan, 50, RT_SEED)
    for scn in scns:
        avail = scn.availability[1]
        assert avail[-1] == 0
        # the pattern is an intact prefix of the plan followed by zeros
        assert all(a in (0, 1) for a in avail)
        assert all(avail[t] >= avail[t + 1] for t in range(2))
    # whole-day onset drops the line for the entire horizon
    for scn in sample_outages(risk, plan, 10, RT_SEED, onset=WHOLE_DAY_ONSET):
        assert scn.availability[1] == (0, 0, 0)


def test_samples_respect_plan_and_persistence():
    plan = all_on_plan(3, line_ids=(1, 2))
    plan = CommitmentPlan(gen_on=plan.gen_on, gen_up=plan.gen_up,
                          gen_dn=plan.gen_dn,
                          line_on={1: (1, 0, 0), 2: (1, 1, 1)},
                          line_down={1: (0, 1, 0), 2: (0, 0, 0)})
    risk = [line_risk_entry(1, 0.5), line_risk_entry(2, 0.5)]
    for scn in sample_outages(risk, plan, 300, RT_SEED):
        for lid, avail in scn.availability.items():
            assert len(avail) == 3
            for t in range(3):
                assert avail[t] <= plan.line_on[lid][t]
            assert all(avail[t] >= avail[t + 1] for t in range(2))


def test_sample_frequency_within_binomial_band():
    plan = all_on_plan(4, line_ids=(7,))
    risk = [line_risk_entry(7, 0.3)]
    n = 2000
    scns = sample_outages(risk, plan, n, RT_SEED)
    failures = sum(1 for s in scns if s.availability[7][-1] == 0)
    half_width = 3 * math.sqrt(0.3 * 0.7 / n)
    assert abs(failures / n - 0.3) < half_width


def test_sampling_deterministic_and_prefix_stable():
    plan = all_on_plan(4, line_ids=(1, 2))
    risk = [line_risk_entry(1, 0.4), line_risk_entry(2, 0.2)]
    a = sample_outages(risk, plan, 60, RT_SEED)
    b = sample_outages(risk, plan, 60, RT_SEED)
    assert [s.availability for s in a] == [s.availability for s in b]
    # drawing more samples never rewrites earlier scenarios
    longer = sample_outages(risk, plan, 120, RT_SEED)
    assert [s.availability for s in longer[:60]] == \
        [s.availability for s in a]
    other = sample_outages(risk, plan, 60, RT_SEED + 1)
    assert [s.availability for s in other] != [s.availability for s in a]


def test_sample_validation_errors():
    plan = all_on_plan(2, line_ids=(1,))
    with pytest.raises(ConfigError):
        sample_outages([], plan, 0, RT_SEED)
    with pytest.raises(ConfigError):
        sample_outages([], plan, 5, RT_SEED, onset="sometimes")


def test_sampled_scenarios_carry_realized_demand():
    plan = all_on_plan(2, line_ids=(1,))
    realized = {1: (12.0, 14.0)}
    scns = sample_outages([], plan, 3, RT_SEED, demand=realized)
    assert all(s.demand == realized for s in scns)


# -- recourse dispatch ------------------------------------------------------------


def test_no_outage_recourse_matches_day_ahead_cost(toy3):
    plan, dispatch, costs = day_ahead_toy3(toy3)
    scn = OutageScenario(id=0, probability=1.0,
                         availability=dict(plan.line_on),
                         demand={d.id: tuple(d.base_profile)
                                 for d in toy3.demands})
    rt_dispatch, rt_cost = solve_recourse(toy3, plan, scn)
    assert rt_cost == pytest.approx(costs.total, rel=1e-9)
    for g in toy3.generators:
        for t in range(toy3.horizon):
            assert rt_dispatch.gen_p[0][g.id][t] == pytest.approx(
                dispatch.gen_p[0][g.id][t], abs=1e-6)


def test_recourse_islanding_sheds_the_cut_bus(toy3):
    plan, _, costs = day_ahead_toy3(toy3)
    assert costs.total == pytest.approx(880.0)  # g1 only: 20 + 172 * 5
    scn = OutageScenario(id=0, probability=1.0,
                         availability={1: (0, 0, 0), 2: (1, 1, 1)},
                         demand={d.id: tuple(d.base_profile)
                                 for d in toy3.demands})
    dispatch, cost = solve_recourse(toy3, plan, scn)
    assert dispatch.served[0][1] == pytest.approx((0.0, 0.0, 0.0))
    # bus 2 load lost at voll, bus 3 still fed by unit 1 over line 2
    assert cost == pytest.approx(20.0 + 105 * 1000.0 + 67 * 5.0)


def test_stranded_minimum_output_backs_down_at_penalty(toy3):
    # cutting both lines strands unit 1 (p_min 10) with no local load; the
    # recourse LP stays feasible and charges the documented relief rate
    from psps.formulation import relief_penalty_rate

    plan, _, _ = day_ahead_toy3(toy3)
    scn = OutageScenario(id=0, probability=1.0,
                         availability={1: (0, 0, 0), 2: (0, 0, 0)},
                         demand={d.id: tuple(d.base_profile)
                                 for d in toy3.demands})
    dispatch, cost = solve_recourse(toy3, plan, scn)
    assert dispatch.gen_p[0][1] == pytest.approx((0.0, 0.0, 0.0), abs=1e-7)
    assert dispatch.served[0][1] == pytest.approx((0.0, 0.0, 0.0), abs=1e-9)
    assert dispatch.served[0][2] == pytest.approx((0.0, 0.0, 0.0), abs=1e-9)
    rate = relief_penalty_rate(toy3)
    # sunk start (20) + all load shed (172 MWh at 1000) + 10 MW relieved
    # below minimum for 3 steps
    assert cost == pytest.approx(20.0 + 172 * 1000.0 + 3 * 10.0 * rate,
                                 rel=1e-9)


def test_recourse_outage_can_only_cost_more(toy3):
    plan, _, costs = day_ahead_toy3(toy3)
    demand = {d.id: tuple(d.base_profile) for d in toy3.demands}
    for avail in ({1: (1, 1, 0), 2: (1, 1, 1)},
                  {1: (1, 1, 1), 2: (0, 0, 0)},
                  {1: (0, 0, 0), 2: (0, 0, 0)}):
        scn = OutageScenario(id=0, probability=1.0, availability=avail,
                             demand=demand)
        _, cost = solve_recourse(toy3, plan, scn)
        assert cost > costs.total - 1e-9


# -- report aggregation -----------------------------------------------------------


def test_report_no_risk_collapses_to_day_ahead(toy3):
    plan, _, costs = day_ahead_toy3(toy3)
    risk = [line_risk_entry(1, 0.0), line_risk_entry(2, 0.0)]
    report = evaluate_plan(toy3, plan, risk, n=8, seed=RT_SEED)
    assert report.expected_cost == pytest.approx(costs.total, rel=1e-9)
    assert report.per_scenario == pytest.approx(
        (costs.total,) * 8, rel=1e-9)
    assert report.expected_cost == pytest.approx(
        float(np.mean(report.per_scenario)), rel=1e-12)
    assert report.demand_served_mwh == pytest.approx(172.0)
    assert report.aag_mw == pytest.approx(100.0)  # unit 1 committed all day
    assert report.realized_risk == pytest.approx(0.0)
    assert report.n == 8 and report.seed == RT_SEED


def test_report_blends_outage_costs(toy3):
    plan, _, costs = day_ahead_toy3(toy3)
    risk = [line_risk_entry(1, 0.5), line_risk_entry(2, 0.0)]
    report = evaluate_plan(toy3, plan, risk, n=40, seed=RT_SEED)
    assert report.expected_cost == pytest.approx(
        float(np.mean(report.per_scenario)), rel=1e-12)
    assert report.expected_cost > costs.total
    assert min(report.per_scenario) == pytest.approx(costs.total, rel=1e-9)
    assert report.median_cost <= report.p95_cost <= max(report.per_scenario)
    assert report.realized_risk == pytest.approx(math.log(0.5))
    again = evaluate_plan(toy3, plan, risk, n=40, seed=RT_SEED)
    assert again.per_scenario == report.per_scenario


# -- plan summaries ---------------------------------------------------------------


def test_average_available_generation_examples():
    profile = tuple([0.0] * 24)
    net = PowerNetwork(
        buses=(Bus(id=1, name="b", latitude=34.0, longitude=-117.0),),
        lines=(),
        generators=(Generator(id=1, bus=1, p_min=0.0, p_max=100.0,
                              ramp_down=-100.0, ramp_up=100.0, min_up=1,
                              min_down=1, marginal_cost=5.0, startup_cost=0.0,
                              shutdown_cost=0.0, initially_on=False),),
        demands=(Demand(id=1, bus=1, voll=1000.0, base_profile=profile),),
        horizon=24, step_hours=1.0)
    off = {1: tuple([0] * 24)}
    half = {1: tuple([1] * 12 + [0] * 12)}
    zero = {1: tuple([0] * 24)}
    plan_off = CommitmentPlan(gen_on=off, gen_up=zero, gen_dn=zero,
                              line_on={}, line_down={})
    plan_half = CommitmentPlan(gen_on=half, gen_up=zero, gen_dn=zero,
                               line_on={}, line_down={})
    assert average_available_generation(net, plan_off) == pytest.approx(0.0)
    assert average_available_generation(net, plan_half) == pytest.approx(50.0)
    bigger = replace(net, generators=(
        replace(net.generators[0], p_max=300.0),))
    assert average_available_generation(bigger, plan_half) == \
        pytest.approx(150.0)


def test_realized_risk_examples():
    risky = [line_risk_entry(4, 0.1)]
    assert realized_risk(risky, {4: 0}) == pytest.approx(math.log(0.1))
    assert realized_risk(risky, {4: 1}) == pytest.approx(math.log(0.9))
    assert realized_risk([], {4: 0}) == pytest.approx(0.0)
    mixed = [line_risk_entry(1, 0.1), line_risk_entry(2, 0.2),
             line_risk_entry(3, 0.0)]
    got = realized_risk(mixed, {1: 0, 2: 1, 3: 0})
    assert got == pytest.approx(math.log(0.1) + math.log(0.8))


def test_plan_end_status_reads_last_step():
    plan = all_on_plan(3, line_ids=(1,))
    plan = CommitmentPlan(gen_on=plan.gen_on, gen_up=plan.gen_up,
                          gen_dn=plan.gen_dn,
                          line_on={1: (1, 1, 0), 2: (1, 1, 1)},
                          line_down={1: (0, 0, 1), 2: (0, 0, 0)})
    assert plan_end_status(plan) == {1: 0, 2: 1}


# -- receding horizon -------------------------------------------------------------


def test_receding_horizon_full_window_matches_one_shot():
    net = ramp_net(ramp_up=100.0, profile=(10.0, 20.0, 15.0, 12.0))
    plan = all_on_plan(4, line_ids=())
    demand = {1: (10.0, 20.0, 15.0, 12.0)}
    scn = OutageScenario(id=0, probability=1.0, availability={},
                         demand=demand)
    one_shot, _ = solve_recourse(net, plan, scn)
    stitched = receding_horizon_run(net, plan, demand, window=4)
    assert stitched.gen_p[0][1] == pytest.approx(one_shot.gen_p[0][1],
                                                 abs=1e-6)
    assert stitched.served[0][1] == pytest.approx((1.0, 1.0, 1.0, 1.0))


def test_receding_horizon_short_window_tracks_demand():
    net = ramp_net(ramp_up=100.0, profile=(10.0, 20.0, 15.0, 12.0))
    plan = all_on_plan(4, line_ids=())
    demand = {1: (10.0, 20.0, 15.0, 12.0)}
    stitched = receding_horizon_run(net, plan, demand, window=2)
    assert stitched.gen_p[0][1] == pytest.approx((10.0, 20.0, 15.0, 12.0))


def test_receding_horizon_anchors_ramps_across_commits():
    net = ramp_net()
    plan = all_on_plan(4, line_ids=())
    demand = {1: (0.0, 40.0, 40.0, 40.0)}
    stitched = receding_horizon_run(net, plan, demand, window=2)
    aux = stitched.gen_aux[0][1]
    prev = 0.0
    for value in aux:
        assert value - prev <= 15.0 + 1e-6
        assert value - prev >= -50.0 - 1e-6
        prev = value
    # the ramp cap climbs output 15 MW per step from a standing start
    assert stitched.gen_p[0][1] == pytest.approx((0.0, 15.0, 30.0, 40.0))


def test_receding_horizon_validation():
    net = ramp_net()
    plan = all_on_plan(4, line_ids=())
    demand = {1: (0.0, 40.0, 40.0, 40.0)}
    with pytest.raises(ConfigError):
        receding_horizon_run(net, plan, demand, window=0)
    with pytest.raises(ConfigError):
        receding_horizon_run(net, plan, demand, window=5)
    with pytest.raises(DimensionMismatch):
        receding_horizon_run(net, plan, {1: (0.0, 40.0)}, window=2)


# -- realized demand files ---------------------------------------------------------


def write_demand_csv(path, rows, header="demand_id,step,mw"):
    lines = [header] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def test_load_realized_demand_happy_path(tmp_path):
    path = tmp_path / "realized.csv"
    write_demand_csv(path, [
        (1, 1, 30.0), (1, 2, 40.0), (1, 3, 35.0),
        (2, 1, 20.0), (2, 2, 25.0), (2, 3, 22.0),
    ])
    out = load_realized_demand(path)
    assert out == {1: (30.0, 40.0, 35.0), 2: (20.0, 25.0, 22.0)}


def test_load_realized_demand_missing_column(tmp_path):
    path = tmp_path / "realized.csv"
    write_demand_csv(path, [(1, 1, 30.0)], header="demand_id,hour,mw")
    with pytest.raises(ParseError):
        load_realized_demand(path)


def test_load_realized_demand_gap_in_steps(tmp_path):
    path = tmp_path / "realized.csv"
    # demand 1 skips step 2, so its curve cannot be assembled
    write_demand_csv(path, [(1, 1, 30.0), (1, 3, 35.0), (2, 1, 20.0),
                            (2, 2, 25.0), (2, 3, 22.0)])
    with pytest.raises(ValidationError):
        load_realized_demand(path)


def test_load_realized_demand_bad_number(tmp_path):
    path = tmp_path / "realized.csv"
    write_demand_csv(path, [(1, 1, "thirty")])
    with pytest.raises(ParseError):
        load_realized_demand(path)
