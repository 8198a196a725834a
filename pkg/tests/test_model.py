"""Domain types, instance validation, and the expected-output helper."""
import dataclasses

import pytest

from market_coord.model import (
    BidCurve,
    Scenario,
    ScenarioSet,
    SystemParams,
    expected_vre,
    validate,
    validate_bid_curve,
)


def test_bundled_instances_validate_clean(bundled):
    for name, inst in bundled.items():
        report = validate(inst)
        assert report.ok, f"{name}: {report.violations}"


def test_probabilities_must_sum_to_one(t1):
    bad = dataclasses.replace(
        t1,
        scenario_set=ScenarioSet(
            hours=(0,),
            da_load=t1.scenario_set.da_load,
            scenarios=(
                Scenario("a", 0.6, {("w1", 0): 10.0}, {}),
                Scenario("b", 0.6, {("w1", 0): 10.0}, {}),
            ),
        ),
    )
    report = validate(bad)
    assert any("sum to 1.2" in v for v in report.violations)


def test_vre_realization_above_capacity_flagged(t1):
    bad = dataclasses.replace(
        t1,
        scenario_set=ScenarioSet(
            hours=(0,),
            da_load=t1.scenario_set.da_load,
            scenarios=(Scenario("a", 1.0, {("w1", 0): 60.0}, {}),),
        ),
    )
    report = validate(bad)
    assert not report.ok


def test_validate_is_pure_and_idempotent(t1):
    first = validate(t1)
    second = validate(t1)
    assert first.violations == second.violations
    assert first.warnings == second.warnings


def test_bid_prices_must_be_nondecreasing(t1):
    bad = BidCurve(owner="w1", hour=0, segments=((5.0, 1.0), (2.0, 1.0)))
    problems = validate_bid_curve(bad, t1)
    assert any("nondecreasing" in p for p in problems)


def test_bid_quantities_bounded_by_capacity(t1):
    bad = BidCurve(owner="w1", hour=0, segments=((0.0, 40.0), (1.0, 40.0)))
    problems = validate_bid_curve(bad, t1)
    assert any("exceeds capacity" in p for p in problems)
    ok = BidCurve(owner="w1", hour=0, segments=((0.0, 20.0), (1.0, 20.0)))
    assert validate_bid_curve(ok, t1) == []


def test_expected_vre_t1_is_30(t1):
    assert expected_vre(t1.scenario_set, "w1", 0) == pytest.approx(30.0)


def test_expected_vre_degenerate_and_zero(t1):
    ss = ScenarioSet(
        hours=(0,),
        da_load={},
        scenarios=(Scenario("a", 1.0, {("w1", 0): 7.0}, {}),),
    )
    assert expected_vre(ss, "w1", 0) == pytest.approx(7.0)
    zero = ScenarioSet(
        hours=(0,),
        da_load={},
        scenarios=(Scenario("a", 1.0, {("w1", 0): 0.0}, {}),),
    )
    assert expected_vre(zero, "w1", 0) == 0.0


def test_expected_vre_unknown_ids_raise(t1):
    with pytest.raises(KeyError):
        expected_vre(t1.scenario_set, "nope", 0)
    with pytest.raises(KeyError):
        expected_vre(t1.scenario_set, "w1", 99)


def test_expected_vre_bounded_by_capacity(bundled):
    for inst in bundled.values():
        for k in inst.vre_units:
            for t in inst.hours:
                value = expected_vre(inst.scenario_set, k.id, t)
                assert 0.0 <= value <= k.capacity


def test_bid_curve_total_quantity():
    bid = BidCurve(owner="w1", hour=0, segments=((0.0, 10.0), (2.0, 5.0)))
    assert bid.total_quantity == pytest.approx(15.0)


def test_price_cap_defaults_to_voll():
    assert SystemParams(voll=1000.0).bid_price_cap == 1000.0
    assert SystemParams(voll=1000.0, price_cap=350.0).bid_price_cap == 350.0


def test_instance_lookups(t1):
    assert t1.unit("g1").variable_cost == pytest.approx(20.0)
    assert t1.vre("w1").capacity == pytest.approx(50.0)
    with pytest.raises(KeyError):
        t1.unit("missing")
