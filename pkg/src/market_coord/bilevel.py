"""Bid-quantity optimization via the single-level LP relaxation.

With fixed segment prices, the bid problem is bilevel: the upper level picks
bid quantities and all per-scenario re-dispatch, the lower level clears the
day-ahead market. Lower-level optimality is imposed through dual feasibility
plus one strong-duality equality; the bilinear dual-times-quantity products
in the dual objective are replaced by auxiliary variables boxed with
McCormick envelopes, leaving one LP.

Reported costs always come from re-running the sequential markets on the
extracted quantities, never from the relaxed objective.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

from .dam import DaSchedule, dam_structure, wname
from .lp import GE, LE, EQ, LpModel, LpStatus, ToleranceConfig, DEFAULT_TOL, solve
from .model import BidCurve, Instance, expected_vre
from .policies import PolicyResult, evaluate_bids, myopic_bids

__all__ = [
    "BidPricesConfig",
    "McCormickBounds",
    "BilevelSolution",
    "TheoremReport",
    "SweepTable",
    "build_relaxed_bid",
    "solve_bid",
    "solve_bid_q",
    "verify_theorem1",
    "collapse_to_single_segment",
    "oracle_grid_search",
    "price_sweep",
    "vre_profit",
]

THEOREM_TOL = 0.005  # relative; mirrors the reported multi- vs single-segment gap


@dataclass(frozen=True)
class BidPricesConfig:
    """Fixed segment prices, shared across VRE units and hours."""

    prices: tuple[float, ...]

    def __post_init__(self):
        if any(b < a for a, b in zip(self.prices, self.prices[1:])):
            raise ValueError("segment prices must be nondecreasing")
        if self.prices and self.prices[0] < 0:
            raise ValueError("segment prices must be nonnegative")

    @property
    def seg_count(self) -> int:
        return len(self.prices)

    def table(self, instance: Instance) -> dict[tuple[str, int, int], float]:
        return {
            (k.id, t, s): p
            for k in instance.vre_units
            for t in instance.hours
            for s, p in enumerate(self.prices)
        }


@dataclass(frozen=True)
class McCormickBounds:
    """Box bounds for the dual-times-quantity products.

    The cap-row dual magnitude is bounded by `dual_bound`; default is VoLL,
    the largest marginal price the model can produce.
    """

    dual_bound: float | None = None

    def resolved(self, instance: Instance) -> float:
        bound = instance.system.voll if self.dual_bound is None else self.dual_bound
        if bound <= 0:
            raise ValueError(f"dual bound must be > 0, got {bound}")
        return bound


def _as_prices(prices) -> BidPricesConfig:
    if isinstance(prices, BidPricesConfig):
        return prices
    return BidPricesConfig(prices=tuple(float(p) for p in prices))


def build_relaxed_bid(
    instance: Instance,
    prices,
    bounds: McCormickBounds = McCormickBounds(),
) -> tuple[LpModel, "RelaxedContext"]:
    cfg = _as_prices(prices)
    lam_bar = bounds.resolved(instance)
    price_table = cfg.table(instance)
    structure = dam_structure(instance, cfg.seg_count, price_table)
    model = LpModel(name="relaxed-bid")

    # upper level: bid quantities, per segment and in total within capacity
    for k in instance.vre_units:
        for t in instance.hours:
            for s in range(cfg.seg_count):
                model.add_var(wname(k.id, t, s), lb=0.0, ub=k.capacity)
            model.add_constr(
                f"w_total[{k.id},{t}]",
                {wname(k.id, t, s): 1.0 for s in range(cfg.seg_count)},
                LE,
                k.capacity,
            )

    # lower-level primal (objective carries the true, zero-VRE-cost measure)
    for v in structure.var_obj:
        model.add_var(v, obj=structure.true_obj[v])
    for row in structure.rows:
        model.add_row(row)

    # lower-level duals; cap-row duals get the McCormick box
    dual_of: dict[str, str] = {}
    for row in structure.rows:
        y = f"y[{row.name}]"
        if row.sense == GE:
            model.add_var(y, lb=0.0)
        elif row.sense == LE:
            lb = -lam_bar if row.name in structure.cap_rows else -math.inf
            model.add_var(y, lb=lb, ub=0.0)
        else:
            model.add_var(y)
        dual_of[row.name] = y

    # dual feasibility: one equality per lower-level primal variable
    columns: dict[str, dict[str, float]] = {v: {} for v in structure.var_obj}
    for row in structure.rows:
        y = dual_of[row.name]
        for var, c in row.coeffs.items():
            if var in columns:
                columns[var][y] = columns[var].get(y, 0.0) + c
    for v, col in columns.items():
        model.add_constr(f"dual[{v}]", col, EQ, structure.var_obj[v])

    # auxiliaries for the dual-objective products, with their envelopes
    aux_terms: list[str] = []
    for row_name, (k, t, s) in structure.cap_rows.items():
        y = dual_of[row_name]
        w = wname(k, t, s)
        w_bar = instance.vre(k).capacity
        v = model.add_var(f"v[{k},{t},{s}]")
        aux_terms.append(v)
        model.add_constr(f"mc1[{k},{t},{s}]", {v: 1.0, w: lam_bar}, GE, 0.0)
        model.add_constr(f"mc2[{k},{t},{s}]", {v: 1.0, y: -w_bar}, GE, 0.0)
        model.add_constr(
            f"mc3[{k},{t},{s}]", {v: 1.0, w: lam_bar, y: -w_bar}, LE, lam_bar * w_bar
        )
        model.add_constr(f"mc4[{k},{t},{s}]", {v: 1.0}, LE, 0.0)

    # strong duality: lower primal objective equals the dual objective,
    # with each product replaced by its auxiliary
    sd: dict[str, float] = {}
    for v, c in structure.var_obj.items():
        if c:
            sd[v] = sd.get(v, 0.0) + c
    for row in structure.rows:
        if row.rhs:
            y = dual_of[row.name]
            sd[y] = sd.get(y, 0.0) - row.rhs
    for v in aux_terms:
        sd[v] = sd.get(v, 0.0) - 1.0
    model.add_constr("strong_duality", sd, EQ, 0.0)

    # re-dispatch blocks, coupled to the shared day-ahead schedule
    from .rtm import rtm_structure

    for scen in instance.scenario_set.scenarios:
        rts = rtm_structure(instance, scen, suffix=f"@{scen.id}")
        pi = scen.probability
        for var, obj in rts.var_obj.items():
            model.add_var(var, obj=pi * obj)
        for var, obj in rts.da_obj.items():
            model.add_obj(var, pi * obj)
        for row in rts.rows:
            model.add_row(row)

    ctx = RelaxedContext(cfg=cfg, structure=structure, dual_of=dual_of, lam_bar=lam_bar)
    return model, ctx


@dataclass
class RelaxedContext:
    cfg: BidPricesConfig
    structure: object
    dual_of: dict[str, str]
    lam_bar: float


@dataclass
class BilevelSolution:
    quantities: dict[tuple[str, int, int], float]
    prices: tuple[float, ...]
    relaxed_objective: float
    s_bid: float  # sequential re-evaluation of the extracted quantities
    policy_result: PolicyResult
    complementarity_residual: float
    mccormick_gap: float
    bids: tuple[BidCurve, ...] = ()


def _bids_from_quantities(
    instance: Instance, prices: tuple[float, ...],
    quantities: dict[tuple[str, int, int], float],
) -> list[BidCurve]:
    bids = []
    for k in instance.vre_units:
        for t in instance.hours:
            qs = [max(0.0, quantities[(k.id, t, s)]) for s in range(len(prices))]
            total = sum(qs)
            if total > k.capacity and total > 0:
                qs = [q * k.capacity / total for q in qs]
            bids.append(BidCurve(owner=k.id, hour=t, segments=tuple(zip(prices, qs))))
    return bids


def solve_bid(
    instance: Instance,
    prices,
    bounds: McCormickBounds = McCormickBounds(),
    tol: ToleranceConfig = DEFAULT_TOL,
    policy_name: str = "BiD",
) -> BilevelSolution:
    """Optimize bid quantities for fixed prices and score them sequentially."""
    cfg = _as_prices(prices)
    model, ctx = build_relaxed_bid(instance, cfg, bounds)
    sol = solve(model, tol)
    if sol.status is LpStatus.INFEASIBLE:
        raise RuntimeError(
            "relaxed bid LP is infeasible; the dual bound box may be too tight"
        )
    if sol.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"relaxed bid LP ended {sol.status.value}")

    # The relaxed optimum is often flat in the bid quantities: envelope slack
    # lets the lower level claim dispatch of out-of-merit segments. Re-solve
    # with the objective pinned, preferring quantities in cheap segments and
    # the least total quantity; that vertex needs the least envelope slack.
    relaxed_objective = sol.objective
    obj_coeffs = {v: c for v, c in zip(model.var_names, model.obj) if c}
    cap = relaxed_objective + 1e-7 * max(1.0, abs(relaxed_objective))
    model.add_constr("relaxed_opt_cap", obj_coeffs, LE, cap)
    for idx in range(model.n_vars):
        model.obj[idx] = 0.0
    for k in instance.vre_units:
        for t in instance.hours:
            for s, price in enumerate(cfg.prices):
                model.add_obj(wname(k.id, t, s), price + 1e-3 + 1e-6 * s)
    refined = solve(model, tol)
    if refined.status is LpStatus.OPTIMAL:
        sol = refined

    quantities = {
        (k.id, t, s): sol.primal[wname(k.id, t, s)]
        for k in instance.vre_units
        for t in instance.hours
        for s in range(cfg.seg_count)
    }
    bids = _bids_from_quantities(instance, cfg.prices, quantities)
    result = evaluate_bids(instance, bids, tol, policy=policy_name)

    # lower-level strong-duality residual with the true bilinear products
    structure = ctx.structure
    primal_obj = sum(c * sol.primal[v] for v, c in structure.var_obj.items())
    dual_obj = 0.0
    for row in structure.rows:
        dual_obj += row.rhs * sol.primal[ctx.dual_of[row.name]]
    for row_name, (k, t, s) in structure.cap_rows.items():
        dual_obj += sol.primal[ctx.dual_of[row_name]] * sol.primal[wname(k, t, s)]
    residual = abs(primal_obj - dual_obj)

    return BilevelSolution(
        quantities=quantities,
        prices=cfg.prices,
        relaxed_objective=relaxed_objective,
        s_bid=result.s_total,
        policy_result=result,
        complementarity_residual=residual,
        mccormick_gap=result.s_total - relaxed_objective,
        bids=tuple(bids),
    )


def solve_bid_q(
    instance: Instance,
    bounds: McCormickBounds = McCormickBounds(),
    tol: ToleranceConfig = DEFAULT_TOL,
) -> BilevelSolution:
    """Quantity-only variant: one segment at zero price."""
    return solve_bid(instance, (0.0,), bounds, tol, policy_name="BiD-q")


@dataclass
class TheoremReport:
    """Multi-segment vs quantity-only cost comparison.

    Equality is asserted only when the price vector contains a zero-price
    segment; otherwise the report is informational.
    """

    s_bid: float
    s_bid_q: float
    relative_gap: float
    has_zero_segment: bool
    tolerance: float
    passed: bool | None  # None when equality is not asserted

    @property
    def asserted(self) -> bool:
        return self.has_zero_segment


def verify_theorem1(
    instance: Instance,
    prices,
    bounds: McCormickBounds = McCormickBounds(),
    tol: ToleranceConfig = DEFAULT_TOL,
    theorem_tol: float = THEOREM_TOL,
) -> TheoremReport:
    cfg = _as_prices(prices)
    multi = solve_bid(instance, cfg, bounds, tol)
    single = solve_bid_q(instance, bounds, tol)
    scale = max(1.0, abs(single.s_bid))
    gap = abs(multi.s_bid - single.s_bid) / scale
    has_zero = any(abs(p) < 1e-12 for p in cfg.prices)
    return TheoremReport(
        s_bid=multi.s_bid,
        s_bid_q=single.s_bid,
        relative_gap=gap,
        has_zero_segment=has_zero,
        tolerance=theorem_tol,
        passed=(gap <= theorem_tol) if has_zero else None,
    )


def collapse_to_single_segment(
    multi_solution: BilevelSolution, da: DaSchedule
) -> list[BidCurve]:
    """Fold a multi-segment solution into zero-price single-segment curves.

    The collapsed quantity per (unit, hour) is the total dispatched segment
    quantity from the day-ahead clearing under the multi-segment bids.
    """
    totals: dict[tuple[str, int], float] = {}
    for (k, t, _s), p in da.p_vre.items():
        totals[(k, t)] = totals.get((k, t), 0.0) + max(0.0, p)
    return [
        BidCurve(owner=k, hour=t, segments=((0.0, q),))
        for (k, t), q in sorted(totals.items())
    ]


def oracle_grid_search(
    instance: Instance,
    prices,
    grid_step: float,
    tol: ToleranceConfig = DEFAULT_TOL,
    max_dims: int = 4,
) -> tuple[list[BidCurve], float]:
    """Exhaustive quantity search; the independent ground truth for solve_bid.

    Enumerates every grid point of [0, capacity] per (unit, hour, segment)
    dimension, scoring each with the sequential pipeline. Intended for tiny
    instances only; guarded by `max_dims`.
    """
    cfg = _as_prices(prices)
    dims = [
        (k.id, t, s, instance.vre(k.id).capacity)
        for k in instance.vre_units
        for t in instance.hours
        for s in range(cfg.seg_count)
    ]
    if len(dims) > max_dims:
        raise ValueError(
            f"grid search over {len(dims)} dimensions exceeds the guard of {max_dims}"
        )
    if grid_step <= 0:
        raise ValueError("grid step must be > 0")
    axes = []
    for _k, _t, _s, cap in dims:
        n = int(math.floor(cap / grid_step + 1e-9))
        pts = [i * grid_step for i in range(n + 1)]
        if pts[-1] < cap - 1e-9:
            pts.append(cap)
        axes.append(pts)

    best_s = math.inf
    best_q: dict[tuple[str, int, int], float] | None = None
    caps = {k.id: k.capacity for k in instance.vre_units}
    for point in itertools.product(*axes):
        q = {(k, t, s): v for (k, t, s, _), v in zip(dims, point)}
        ok = True
        for k in caps:
            for t in instance.hours:
                if sum(q.get((k, t, s), 0.0) for s in range(cfg.seg_count)) > caps[k] + 1e-9:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        bids = _bids_from_quantities(instance, cfg.prices, q)
        s_val = evaluate_bids(instance, bids, tol).s_total
        if s_val < best_s - 1e-12:
            best_s = s_val
            best_q = q
    assert best_q is not None
    return _bids_from_quantities(instance, cfg.prices, best_q), best_s


def vre_profit(instance: Instance, result: PolicyResult) -> dict[str, float]:
    """Two-settlement producer profit per VRE unit, plus the aggregate.

    Day-ahead energy settles at the day-ahead LMP; the realized deviation
    (available output minus curtailment minus day-ahead schedule) settles at
    the scenario real-time LMP. Production cost is zero.
    """
    if result.da_duals is None or not result.rt_dispatches:
        raise ValueError("profit needs day-ahead duals and per-scenario dispatches")
    profits: dict[str, float] = {}
    scen_by_id = {s.id: s for s in instance.scenario_set.scenarios}
    for k in instance.vre_units:
        total = 0.0
        for t in instance.hours:
            sched = result.da.vre_total(k.id, t)
            total += result.da_duals.balance[(k.bus, t)] * sched
            for disp in result.rt_dispatches:
                scen = scen_by_id[disp.scenario_id]
                realized = scen.vre_real.get((k.id, t), 0.0) - disp.curtailment[(k.id, t)]
                total += scen.probability * disp.lmp[(k.bus, t)] * (realized - sched)
        profits[k.id] = total
    profits["aggregate"] = sum(v for kk, v in profits.items() if kk != "aggregate")
    return profits


@dataclass
class SweepTable:
    """Single-segment price sweep: BiD-at-price vs MyD-at-price outcomes."""

    rows: list[dict] = field(default_factory=list)

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(self.rows[0].keys()))
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v)
                             for k, v in row.items()})
        return buf.getvalue()


def _load_weighted_lmps(instance: Instance, result: PolicyResult) -> tuple[float, float]:
    ss = instance.scenario_set
    da_num = sum(result.da_duals.balance[(n, t)] * ss.da_load.get((n, t), 0.0)
                 for n in instance.network.buses for t in instance.hours)
    da_den = sum(ss.da_load.values()) or 1.0
    rt_num = rt_den = 0.0
    scen_by_id = {s.id: s for s in ss.scenarios}
    for disp in result.rt_dispatches:
        scen = scen_by_id[disp.scenario_id]
        for n in instance.network.buses:
            for t in instance.hours:
                load = scen.rt_load.get((n, t), 0.0)
                rt_num += scen.probability * disp.lmp[(n, t)] * load
                rt_den += scen.probability * load
    return da_num / da_den, rt_num / (rt_den or 1.0)


def price_sweep(
    instance: Instance,
    price_points,
    bounds: McCormickBounds = McCormickBounds(),
    tol: ToleranceConfig = DEFAULT_TOL,
) -> SweepTable:
    """Score MyD-at-price and BiD-at-price over single-segment price points."""
    table = SweepTable()
    for price in price_points:
        bid_sol = solve_bid(instance, (price,), bounds, tol)
        myd_bids = [
            BidCurve(owner=b.owner, hour=b.hour,
                     segments=((price, b.segments[0][1]),))
            for b in myopic_bids(instance)
        ]
        myd = evaluate_bids(instance, myd_bids, tol, policy="MyD")
        bid_res = bid_sol.policy_result
        da_lmp_b, rt_lmp_b = _load_weighted_lmps(instance, bid_res)
        da_lmp_m, rt_lmp_m = _load_weighted_lmps(instance, myd)
        wind = lambda r: sum(r.da.p_vre.values())
        table.rows.append({
            "price_usd_per_mwh": price,
            "s_bid_usd": bid_sol.s_bid,
            "s_myd_usd": myd.s_total,
            "da_wind_bid_mw": wind(bid_res),
            "da_wind_myd_mw": wind(myd),
            "lmp_da_bid_usd_per_mwh": da_lmp_b,
            "lmp_rt_bid_usd_per_mwh": rt_lmp_b,
            "lmp_da_myd_usd_per_mwh": da_lmp_m,
            "lmp_rt_myd_usd_per_mwh": rt_lmp_m,
            "profit_bid_usd": vre_profit(instance, bid_res)["aggregate"],
            "profit_myd_usd": vre_profit(instance, myd)["aggregate"],
        })
    return table
