"""Dispatch policies: sequential scoring, MyD, StD, and the comparison."""
import dataclasses
import json

import numpy as np
import pytest

from market_coord.model import BidCurve, VreUnit
from market_coord.policies import (
    compare,
    evaluate_bids,
    myopic,
    myopic_bids,
    random_bid_set,
    stochastic,
)

def test_sequential_score_t1_expected_forecast(t1):
    result = evaluate_bids(t1, [BidCurve("w1", 0, ((0.0, 30.0),))])
    assert result.f_da_true == pytest.approx(1000.0)
    assert result.expected_rt == pytest.approx(250.0)
    assert result.s_total == pytest.approx(1250.0)


def test_sequential_score_t1_optimal_quantity(t1):
    result = evaluate_bids(t1, [BidCurve("w1", 0, ((0.0, 10.0),))])
    assert result.s_total == pytest.approx(1100.0)


def test_score_decomposes_into_parts(bundled):
    for inst in bundled.values():
        result = evaluate_bids(inst, myopic_bids(inst))
        assert result.s_total == pytest.approx(
            result.f_da_true + result.expected_rt, rel=1e-9
        )


def test_score_is_deterministic(sys3):
    bids = myopic_bids(sys3)
    a = evaluate_bids(sys3, bids)
    b = evaluate_bids(sys3, bids)
    assert a.s_total == pytest.approx(b.s_total, rel=1e-12)


def test_no_vre_instance_score_ignores_bids(t1):
    bare = dataclasses.replace(t1, vre_units=())
    result = evaluate_bids(bare, [])
    # conventional unit serves 80 MW day-ahead; scenarios only carry wind
    assert result.f_da_true == pytest.approx(1600.0)


def test_myopic_bids_expected_forecast_per_unit(t1):
    bids = myopic_bids(t1)
    assert len(bids) == 1
    assert bids[0].segments == ((0.0, 30.0),)
    result = myopic(t1)
    assert result.policy == "MyD"
    assert result.s_total == pytest.approx(1250.0)


def test_myopic_two_units_bid_independently(t1):
    scenarios = tuple(
        dataclasses.replace(
            s, vre_real={**s.vre_real, ("w2", 0): 20.0 if s.id == "s1" else 0.0}
        )
        for s in t1.scenario_set.scenarios
    )
    twin = dataclasses.replace(
        t1,
        vre_units=t1.vre_units + (VreUnit(id="w2", bus="b1", capacity=50.0),),
        scenario_set=dataclasses.replace(t1.scenario_set, scenarios=scenarios),
    )
    by_owner = {b.owner: b for b in myopic_bids(twin)}
    assert by_owner["w1"].segments[0][1] == pytest.approx(30.0)
    assert by_owner["w2"].segments[0][1] == pytest.approx(10.0)


def test_myopic_deterministic_scenario_has_zero_rt_cost(t1_perfect):
    result = myopic(t1_perfect)
    assert result.expected_rt == pytest.approx(0.0, abs=1e-6)
    assert result.s_total == pytest.approx(1000.0)


def test_stochastic_t1(t1):
    result = stochastic(t1)
    assert result.policy == "StD"
    assert result.s_total == pytest.approx(1100.0)


def test_stochastic_single_scenario_equals_perfect_foresight(t1_perfect):
    std = stochastic(t1_perfect)
    perfect = evaluate_bids(t1_perfect, [BidCurve("w1", 0, ((0.0, 30.0),))])
    assert std.s_total == pytest.approx(perfect.s_total, rel=1e-9)


def test_stochastic_lower_bounds_every_policy(bundled):
    for inst in bundled.values():
        std = stochastic(inst).s_total
        myd = myopic(inst).s_total
        assert std <= myd + 1e-6 * max(1.0, abs(myd))


def test_compare_t1_table_and_chain(t1):
    table = compare(t1, (0.0,))
    assert table.cost("MyD") == pytest.approx(1250.0)
    assert table.cost("BiD") == pytest.approx(1100.0, rel=1e-6)
    assert table.cost("StD") == pytest.approx(1100.0)
    assert table.chain_ok
    assert table.chain_violation == pytest.approx(0.0, abs=1e-6)


def test_compare_deterministic_scenarios_all_equal(t1_perfect):
    table = compare(t1_perfect, (0.0,))
    costs = [s for _, _, _, s in table.rows]
    assert max(costs) - min(costs) <= 1e-6 * max(1.0, max(costs))


def test_comparison_serialization(t1):
    table = compare(t1, (0.0,))
    text = table.to_csv()
    header = text.splitlines()[0]
    for column in ("policy", "f_DA_true[$]", "E[f_RT][$]", "S[$]"):
        assert column in header
    doc = json.loads(table.to_json())
    assert {r["policy"] for r in doc["rows"]} == {"MyD", "BiD", "StD"}
    assert doc["chain_ok"] is True


def test_random_bid_sets_are_feasible(sys3):
    rng = np.random.default_rng(7)
    for _ in range(20):
        for bid in random_bid_set(sys3, rng, seg_count=3):
            prices = [p for p, _ in bid.segments]
            assert prices == sorted(prices)
            assert all(q >= 0.0 for _, q in bid.segments)
            cap = sys3.vre(bid.owner).capacity
            assert bid.total_quantity <= cap + 1e-9
