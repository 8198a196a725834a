"""Dispatch policies and their comparison.

`evaluate_bids` is the ground-truth scorer: clear the day-ahead market with
the given curves, then re-dispatch every scenario, and sum the true DAM cost
with the expected re-dispatch cost. Myopic (expected-forecast, zero-price)
and stochastic (joint DAM+RTM co-optimization) policies both reduce to it or
to a single LP.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .dam import DaDuals, DaSchedule, bids_by_key, clear_dam, dam_structure, wname
from .lp import LpModel, LpStatus, ToleranceConfig, DEFAULT_TOL, solve
from .model import BidCurve, Instance, expected_vre
from .rtm import RtDispatch, expected_rt_cost, rtm_structure

__all__ = [
    "PolicyResult",
    "ComparisonTable",
    "evaluate_bids",
    "myopic",
    "myopic_bids",
    "stochastic",
    "compare",
    "random_bid_set",
]

CHAIN_TOL = 1e-6  # relative tolerance on the MyD >= BiD >= StD chain


@dataclass
class PolicyResult:
    policy: str  # MyD | StD | BiD | BiD-q | custom
    s_total: float  # expected total system cost, $
    f_da_true: float
    expected_rt: float
    bids: tuple[BidCurve, ...] = ()
    da: DaSchedule | None = None
    da_duals: DaDuals | None = None
    rt_dispatches: list[RtDispatch] = field(default_factory=list)


def evaluate_bids(
    instance: Instance,
    bids,
    tol: ToleranceConfig = DEFAULT_TOL,
    policy: str = "custom",
    threads: int | None = None,
) -> PolicyResult:
    """Score a bid-curve set through the sequential DAM -> RTM pipeline."""
    da, duals = clear_dam(instance, bids, tol)
    e_rt, dispatches = expected_rt_cost(instance, da, tol, threads=threads)
    return PolicyResult(
        policy=policy,
        s_total=da.f_da_true + e_rt,
        f_da_true=da.f_da_true,
        expected_rt=e_rt,
        bids=tuple(bids),
        da=da,
        da_duals=duals,
        rt_dispatches=dispatches,
    )


def myopic_bids(instance: Instance) -> list[BidCurve]:
    """Zero-price single-segment curves at the expected forecast, per unit."""
    ss = instance.scenario_set
    return [
        BidCurve(owner=k.id, hour=t, segments=((0.0, expected_vre(ss, k.id, t)),))
        for k in instance.vre_units
        for t in instance.hours
    ]


def myopic(instance: Instance, tol: ToleranceConfig = DEFAULT_TOL,
           threads: int | None = None) -> PolicyResult:
    result = evaluate_bids(instance, myopic_bids(instance), tol, threads=threads)
    result.policy = "MyD"
    return result


def stochastic(instance: Instance, tol: ToleranceConfig = DEFAULT_TOL) -> PolicyResult:
    """Joint DAM + RTM co-optimization over all scenarios (one LP).

    The day-ahead VRE variable is a single implicit zero-price segment
    bounded by installed capacity; there is no bid curve.
    """
    prices = {(k.id, t, 0): 0.0 for k in instance.vre_units for t in instance.hours}
    structure = dam_structure(instance, 1, prices)
    model = LpModel(name="std")
    for v, obj in structure.true_obj.items():
        model.add_var(v, obj=obj)
    caps = {wname(k.id, t, 0): k.capacity for k in instance.vre_units for t in instance.hours}
    for row in structure.rows:
        coeffs, rhs = {}, row.rhs
        for var, c in row.coeffs.items():
            if var in caps:
                rhs -= c * caps[var]
            else:
                coeffs[var] = c
        model.add_constr(row.name, coeffs, row.sense, rhs)
    for scen in instance.scenario_set.scenarios:
        rts = rtm_structure(instance, scen, suffix=f"@{scen.id}")
        pi = scen.probability
        for v, obj in rts.var_obj.items():
            model.add_var(v, obj=pi * obj)
        for v, obj in rts.da_obj.items():
            model.add_obj(v, pi * obj)
        for row in rts.rows:
            model.add_row(row)
    sol = solve(model, tol)
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"stochastic dispatch solve ended {sol.status.value}")
    f_da_true = sum(c * sol.primal[v] for v, c in structure.true_obj.items())
    return PolicyResult(
        policy="StD",
        s_total=sol.objective,
        f_da_true=f_da_true,
        expected_rt=sol.objective - f_da_true,
    )


@dataclass
class ComparisonTable:
    """Side-by-side policy costs plus the dominance-chain check."""

    rows: list[tuple[str, float, float, float]]  # policy, f_DA_true, E[f_RT], S
    chain_ok: bool
    chain_violation: float  # worst relative violation, 0 when the chain holds

    def cost(self, policy: str) -> float:
        for name, _, _, s in self.rows:
            if name == policy:
                return s
        raise KeyError(policy)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["policy", "f_DA_true[$]", "E[f_RT][$]", "S[$]"])
        for row in self.rows:
            writer.writerow([row[0]] + [f"{v:.6f}" for v in row[1:]])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "rows": [
                    {"policy": p, "f_da_true_usd": fda, "expected_rt_usd": ert, "s_usd": s}
                    for p, fda, ert, s in self.rows
                ],
                "chain_ok": self.chain_ok,
                "chain_violation": self.chain_violation,
            },
            indent=2,
        )


def compare(
    instance: Instance,
    bid_prices: tuple[float, ...] = (0.0,),
    tol: ToleranceConfig = DEFAULT_TOL,
    chain_tol: float = CHAIN_TOL,
) -> ComparisonTable:
    """Run MyD, BiD (at the given segment prices), and StD, and check
    S_MyD >= S_BiD >= S_StD up to `chain_tol` relative."""
    from .bilevel import solve_bid  # late import: bilevel depends on this module

    myd = myopic(instance, tol)
    bid = solve_bid(instance, bid_prices, tol=tol)
    std = stochastic(instance, tol)
    rows = [
        ("MyD", myd.f_da_true, myd.expected_rt, myd.s_total),
        ("BiD", bid.policy_result.f_da_true, bid.policy_result.expected_rt, bid.s_bid),
        ("StD", std.f_da_true, std.expected_rt, std.s_total),
    ]
    scale = max(1.0, abs(std.s_total))
    violation = max(
        (bid.s_bid - myd.s_total) / scale,
        (std.s_total - bid.s_bid) / scale,
        0.0,
    )
    return ComparisonTable(rows=rows, chain_ok=violation <= chain_tol,
                           chain_violation=violation)


def random_bid_set(
    instance: Instance,
    rng: np.random.Generator,
    seg_count: int = 1,
    max_price: float | None = None,
) -> list[BidCurve]:
    """Sample a feasible bid-curve set: nondecreasing prices, quantities
    summing to at most installed capacity. Used by dominance property tests."""
    if max_price is None:
        max_price = instance.system.bid_price_cap
    bids = []
    for k in instance.vre_units:
        for t in instance.hours:
            prices = np.sort(rng.uniform(0.0, max_price, size=seg_count))
            qtys = rng.uniform(0.0, k.capacity, size=seg_count)
            total = qtys.sum()
            if total > k.capacity:
                qtys *= rng.uniform(0.0, 1.0) * k.capacity / total
            bids.append(BidCurve(owner=k.id, hour=t,
                                 segments=tuple(zip(prices.tolist(), qtys.tolist()))))
    return bids
