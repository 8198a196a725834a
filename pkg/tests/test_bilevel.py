"""Bid-quantity optimization: relaxation structure, extraction, verifiers."""
import pytest

from market_coord.bilevel import (
    BidPricesConfig,
    McCormickBounds,
    build_relaxed_bid,
    collapse_to_single_segment,
    oracle_grid_search,
    price_sweep,
    solve_bid,
    solve_bid_q,
    verify_theorem1,
    vre_profit,
)
from market_coord.dam import DaSchedule
from market_coord.lp import LpStatus, solve
from market_coord.model import BidCurve
from market_coord.policies import evaluate_bids, myopic, stochastic

SIX_SEGMENT = (0.0, 2.0, 22.0, 30.0, 32.0, 350.0)


def test_price_config_rejects_bad_vectors():
    with pytest.raises(ValueError):
        BidPricesConfig(prices=(5.0, 2.0))
    with pytest.raises(ValueError):
        BidPricesConfig(prices=(-1.0, 2.0))
    assert BidPricesConfig(prices=(0.0, 2.0)).seg_count == 2


def test_nonpositive_dual_bound_rejected(t1):
    with pytest.raises(ValueError):
        build_relaxed_bid(t1, (0.0,), McCormickBounds(dual_bound=0.0))
    with pytest.raises(ValueError):
        build_relaxed_bid(t1, (0.0,), McCormickBounds(dual_bound=-5.0))


def test_relaxed_model_structure_t1(t1):
    model, ctx = build_relaxed_bid(t1, (0.0,))
    aux = [v for v in model.var_names if v.startswith("v[")]
    assert len(aux) == 1  # one (unit, hour, segment) product on T1
    assert "strong_duality" in model.con_names
    assert "w_total[w1,0]" in model.con_names
    assert ctx.lam_bar == pytest.approx(1000.0)  # defaults to VoLL


def test_relaxed_objective_lower_bounds_the_oracle_optimum(t1):
    model, _ = build_relaxed_bid(t1, (0.0,))
    sol = solve(model)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective <= 1100.0 + 1e-6


def test_solve_bid_t1_matches_oracle(t1):
    sol = solve_bid(t1, (0.0,))
    assert sol.s_bid == pytest.approx(1100.0, rel=1e-6)
    assert sol.mccormick_gap == pytest.approx(sol.s_bid - sol.relaxed_objective)
    assert sol.s_bid >= sol.relaxed_objective - 1e-6


def test_solve_bid_out_of_merit_price_is_harmless(t1):
    sol = solve_bid(t1, (350.0,))
    no_vre = evaluate_bids(t1, [BidCurve("w1", 0, ((0.0, 0.0),))])
    assert sol.s_bid == pytest.approx(no_vre.s_total, rel=1e-6)
    assert sol.policy_result.da.vre_total("w1", 0) == pytest.approx(0.0, abs=1e-6)


def test_solve_bid_deterministic_scenario_recovers_realization(t1_perfect):
    sol = solve_bid_q(t1_perfect)
    assert sol.quantities[("w1", 0, 0)] == pytest.approx(30.0, abs=1e-2)
    assert sol.s_bid == pytest.approx(stochastic(t1_perfect).s_total, rel=1e-6)


def test_solve_bid_q_t1(t1):
    sol = solve_bid_q(t1)
    assert sol.prices == (0.0,)
    assert sol.s_bid == pytest.approx(1100.0, rel=1e-6)


def test_complementarity_residual_within_envelope_bound(t1):
    sol = solve_bid(t1, SIX_SEGMENT)
    envelope = 1000.0 * sum(
        k.capacity * len(SIX_SEGMENT) for k in t1.vre_units
    ) * len(t1.hours)
    assert 0.0 <= sol.complementarity_residual <= envelope


def test_theorem_equality_with_zero_segment(t1):
    report = verify_theorem1(t1, (0.0, 5.0))
    assert report.asserted
    assert report.passed
    assert report.relative_gap <= report.tolerance


def test_theorem_informational_without_zero_segment(t1):
    report = verify_theorem1(t1, (10.0, 20.0))
    assert not report.asserted
    assert report.passed is None


def test_collapse_sums_dispatched_segments():
    da = DaSchedule(
        p_conventional={}, commitment={}, startup_cost={},
        p_vre={("w1", 0, 0): 10.0, ("w1", 0, 1): 5.0, ("w1", 0, 2): 0.0},
        angle={}, f_da_bid=0.0, f_da_true=0.0,
    )
    curves = collapse_to_single_segment(None, da)
    assert curves == [BidCurve(owner="w1", hour=0, segments=((0.0, 15.0),))]
    empty = DaSchedule(
        p_conventional={}, commitment={}, startup_cost={},
        p_vre={("w1", 0, 0): 0.0}, angle={}, f_da_bid=0.0, f_da_true=0.0,
    )
    assert collapse_to_single_segment(None, empty)[0].total_quantity == 0.0


def test_collapse_preserves_t1_cost(t1):
    sol = solve_bid(t1, (0.0, 5.0))
    collapsed = collapse_to_single_segment(sol, sol.policy_result.da)
    score = evaluate_bids(t1, collapsed)
    assert score.s_total == pytest.approx(sol.s_bid, rel=0.005)


def test_oracle_t1_finds_1100(t1):
    bids, best = oracle_grid_search(t1, (0.0,), 1.0)
    assert best == pytest.approx(1100.0)
    assert evaluate_bids(t1, bids).s_total == pytest.approx(best)


def test_oracle_endpoints_only_when_step_exceeds_capacity(t1):
    _, best = oracle_grid_search(t1, (0.0,), 100.0)
    lo = evaluate_bids(t1, [BidCurve("w1", 0, ((0.0, 0.0),))]).s_total
    hi = evaluate_bids(t1, [BidCurve("w1", 0, ((0.0, 50.0),))]).s_total
    assert best == pytest.approx(min(lo, hi))


def test_oracle_deterministic_scenario_minimizer_at_realization(t1_perfect):
    bids, best = oracle_grid_search(t1_perfect, (0.0,), 5.0)
    assert bids[0].segments[0][1] == pytest.approx(30.0)
    assert best == pytest.approx(1000.0)


def test_oracle_dimension_guard(sys5):
    with pytest.raises(ValueError):
        oracle_grid_search(sys5, (0.0, 5.0), 10.0)


def test_vre_profit_t1_expected_forecast(t1):
    profits = vre_profit(t1, myopic(t1))
    # DA: 20 $/MWh on 30 MW; RT deviations settle at 15 (surplus) / 40 (deficit)
    assert profits["w1"] == pytest.approx(350.0)
    assert profits["aggregate"] == pytest.approx(350.0)


def test_vre_profit_zero_deviation_is_da_revenue_only(t1_perfect):
    profits = vre_profit(t1_perfect, myopic(t1_perfect))
    assert profits["w1"] == pytest.approx(20.0 * 30.0)


def test_vre_profit_requires_duals(t1):
    with pytest.raises(ValueError):
        vre_profit(t1, stochastic(t1))


def test_sweep_price_zero_matches_quantity_only(t1):
    table = price_sweep(t1, [0.0])
    assert table.rows[0]["s_bid_usd"] == pytest.approx(
        solve_bid_q(t1).s_bid, rel=1e-6
    )


def test_sweep_high_price_removes_wind_for_both_policies(t1):
    table = price_sweep(t1, [1000.0])
    row = table.rows[0]
    assert row["da_wind_bid_mw"] == pytest.approx(0.0, abs=1e-6)
    assert row["da_wind_myd_mw"] == pytest.approx(0.0, abs=1e-6)
    assert row["s_bid_usd"] == pytest.approx(row["s_myd_usd"], rel=1e-6)


def test_sweep_table_headers_carry_units(sys3):
    table = price_sweep(sys3, [0.0, 40.0])
    header = table.to_csv().splitlines()[0]
    assert "usd" in header and "mw" in header
