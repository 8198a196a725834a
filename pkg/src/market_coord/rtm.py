"""Real-time re-dispatch, one LP per scenario.

The builder is symbolic in the day-ahead quantities: every row and objective
term that references the DAM schedule carries coefficients on the day-ahead
variable names. `clear_rtm` substitutes a fixed schedule; the stochastic and
bilevel modules keep the coupling so the DAM variables are shared decisions.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .dam import DaSchedule
from .lp import EQ, GE, LE, LpModel, LpStatus, Row, ToleranceConfig, DEFAULT_TOL, solve
from .model import Instance, Scenario

__all__ = [
    "RtStructure",
    "RtDispatch",
    "RtmError",
    "rtm_structure",
    "build_rtm",
    "clear_rtm",
    "expected_rt_cost",
    "thread_count",
]


class RtmError(RuntimeError):
    """RT infeasibility; should not occur given shedding and curtailment backstops."""


def _ru(i, t, sfx):
    return f"rU[{i},{t}]{sfx}"


def _rd(i, t, sfx):
    return f"rD[{i},{t}]{sfx}"


def _urt(i, t, sfx):
    return f"uRT[{i},{t}]{sfx}"


def _crt(i, t, sfx):
    return f"cRT[{i},{t}]{sfx}"


def _cr(k, t, sfx):
    return f"pCr[{k},{t}]{sfx}"


def _sh(n, t, sfx):
    return f"lsh[{n},{t}]{sfx}"


def _th(n, t, sfx):
    return f"thRT[{n},{t}]{sfx}"


def _pc(i, t):
    return f"pC[{i},{t}]"


def _uda(i, t):
    return f"uDA[{i},{t}]"


def _cda(i, t):
    return f"cDA[{i},{t}]"


@dataclass
class RtStructure:
    """Symbolic per-scenario RT LP with day-ahead coupling coefficients."""

    var_obj: dict[str, float]  # RT variables -> re-dispatch cost coefficients
    da_obj: dict[str, float]  # DA variables -> their coefficient in f_RT
    rows: list[Row]  # coeffs may reference DA variable names
    suffix: str
    scenario: Scenario


def rtm_structure(instance: Instance, scenario: Scenario, suffix: str = "") -> RtStructure:
    net = instance.network
    hours = instance.hours
    sfx = suffix
    voll = instance.system.voll

    var_obj: dict[str, float] = {}
    da_obj: dict[str, float] = {}
    rows: list[Row] = []

    for g in instance.units:
        for t in hours:
            var_obj[_ru(g.id, t, sfx)] = g.up_redispatch_cost
            var_obj[_rd(g.id, t, sfx)] = -g.down_redispatch_cost
            var_obj[_urt(g.id, t, sfx)] = g.no_load_cost
            var_obj[_crt(g.id, t, sfx)] = 1.0
            da_obj[_uda(g.id, t)] = da_obj.get(_uda(g.id, t), 0.0) - g.no_load_cost
    for k in instance.vre_units:
        for t in hours:
            var_obj[_cr(k.id, t, sfx)] = 0.0
    for n in net.buses:
        for t in hours:
            var_obj[_sh(n, t, sfx)] = voll
            var_obj[_th(n, t, sfx)] = 0.0

    for t in hours:
        for n in net.buses:
            coeffs: dict[str, float] = {}
            rhs = scenario.rt_load.get((n, t), 0.0)
            for g in instance.units:
                if g.bus == n:
                    coeffs[_ru(g.id, t, sfx)] = 1.0
                    coeffs[_rd(g.id, t, sfx)] = -1.0
                    coeffs[_pc(g.id, t)] = 1.0  # DA coupling
            for k in instance.vre_units:
                if k.bus == n:
                    coeffs[_cr(k.id, t, sfx)] = -1.0
                    rhs -= scenario.vre_real.get((k.id, t), 0.0)
            coeffs[_sh(n, t, sfx)] = 1.0
            for _, ln, sign in net.incident_lines(n):
                b = 1.0 / ln.reactance
                fr, to = _th(ln.from_bus, t, sfx), _th(ln.to_bus, t, sfx)
                coeffs[fr] = coeffs.get(fr, 0.0) - sign * b
                coeffs[to] = coeffs.get(to, 0.0) + sign * b
            rows.append(Row(f"rt_bal[{n},{t}]{sfx}", coeffs, EQ, rhs))
        rows.append(Row(f"rt_ref[{t}]{sfx}", {_th(net.slack_bus, t, sfx): 1.0}, EQ, 0.0))
        for ln in net.lines:
            b = 1.0 / ln.reactance
            flow = {_th(ln.from_bus, t, sfx): b, _th(ln.to_bus, t, sfx): -b}
            rows.append(Row(f"rt_flow_ub[{ln.from_bus},{ln.to_bus},{t}]{sfx}", dict(flow), LE, ln.capacity))
            rows.append(Row(f"rt_flow_lb[{ln.from_bus},{ln.to_bus},{t}]{sfx}", dict(flow), GE, -ln.capacity))

    for g in instance.units:
        for idx, t in enumerate(hours):
            prev = hours[idx - 1] if idx > 0 else None
            u = _urt(g.id, t, sfx)
            if g.start_class == "slow":
                rows.append(Row(f"rt_u_fix[{g.id},{t}]{sfx}", {u: 1.0, _uda(g.id, t): -1.0}, EQ, 0.0))
            else:
                rows.append(Row(f"rt_u_min[{g.id},{t}]{sfx}", {u: 1.0, _uda(g.id, t): -1.0}, GE, 0.0))
            rows.append(Row(f"rt_u_ub[{g.id},{t}]{sfx}", {u: 1.0}, LE, 1.0))

            net_out = {_ru(g.id, t, sfx): 1.0, _rd(g.id, t, sfx): -1.0, _pc(g.id, t): 1.0}
            rows.append(Row(f"rt_p_ub[{g.id},{t}]{sfx}", {**net_out, u: -g.p_max}, LE, 0.0))
            rows.append(Row(f"rt_p_lb[{g.id},{t}]{sfx}", {**net_out, u: -g.p_min}, GE, 0.0))

            su = {_crt(g.id, t, sfx): 1.0, _cda(g.id, t): 1.0, u: -g.startup_cost}
            if prev is None:
                rows.append(Row(f"rt_su[{g.id},{t}]{sfx}", su, GE, -g.startup_cost * g.u_init))
            else:
                su[_urt(g.id, prev, sfx)] = g.startup_cost
                rows.append(Row(f"rt_su[{g.id},{t}]{sfx}", su, GE, 0.0))

            if prev is None:
                rows.append(Row(f"rt_ramp_up[{g.id},{t}]{sfx}",
                                {**net_out, u: -g.ramp_up}, LE, g.p_init))
                rows.append(Row(f"rt_ramp_dn[{g.id},{t}]{sfx}", dict(net_out),
                                GE, g.p_init - g.ramp_down * g.u_init))
            else:
                delta = {
                    _ru(g.id, t, sfx): 1.0, _rd(g.id, t, sfx): -1.0, _pc(g.id, t): 1.0,
                    _ru(g.id, prev, sfx): -1.0, _rd(g.id, prev, sfx): 1.0, _pc(g.id, prev): -1.0,
                }
                rows.append(Row(f"rt_ramp_up[{g.id},{t}]{sfx}", {**delta, u: -g.ramp_up}, LE, 0.0))
                rows.append(Row(f"rt_ramp_dn[{g.id},{t}]{sfx}",
                                {**delta, _urt(g.id, prev, sfx): g.ramp_down}, GE, 0.0))

            rows.append(Row(f"rt_c_lb[{g.id},{t}]{sfx}", {_crt(g.id, t, sfx): 1.0}, GE, 0.0))
            rows.append(Row(f"rt_ru_lb[{g.id},{t}]{sfx}", {_ru(g.id, t, sfx): 1.0}, GE, 0.0))
            rows.append(Row(f"rt_rd_lb[{g.id},{t}]{sfx}", {_rd(g.id, t, sfx): 1.0}, GE, 0.0))

    for k in instance.vre_units:
        for t in hours:
            avail = scenario.vre_real.get((k.id, t), 0.0)
            rows.append(Row(f"rt_cr_lb[{k.id},{t}]{sfx}", {_cr(k.id, t, sfx): 1.0}, GE, 0.0))
            rows.append(Row(f"rt_cr_ub[{k.id},{t}]{sfx}", {_cr(k.id, t, sfx): 1.0}, LE, avail))
    for n in net.buses:
        for t in hours:
            rows.append(Row(f"rt_sh_lb[{n},{t}]{sfx}", {_sh(n, t, sfx): 1.0}, GE, 0.0))
            rows.append(Row(f"rt_sh_ub[{n},{t}]{sfx}", {_sh(n, t, sfx): 1.0}, LE,
                            scenario.rt_load.get((n, t), 0.0)))

    return RtStructure(var_obj, da_obj, rows, sfx, scenario)


@dataclass
class RtDispatch:
    """Optimal per-scenario re-dispatch against a fixed day-ahead schedule."""

    scenario_id: str
    r_up: dict[tuple[str, int], float]
    r_down: dict[tuple[str, int], float]
    commitment: dict[tuple[str, int], float]
    startup_cost: dict[tuple[str, int], float]
    curtailment: dict[tuple[str, int], float]
    shed: dict[tuple[str, int], float]
    angle: dict[tuple[str, int], float]
    f_rt: float  # may be negative: down-redispatch credits
    lmp: dict[tuple[str, int], float] = field(default_factory=dict)


def build_rtm(instance: Instance, da: DaSchedule, scenario_id: str) -> tuple[LpModel, RtStructure, float]:
    """RT LP for one scenario with the DA schedule substituted into rows.

    Returns (model, structure, objective offset); f_RT equals the LP
    objective plus the offset, which carries the constant -C0 * uDA terms.
    """
    scenario = _find_scenario(instance, scenario_id)
    structure = rtm_structure(instance, scenario)
    model = LpModel(name=f"rtm[{scenario_id}]")
    for v, obj in structure.var_obj.items():
        model.add_var(v, obj=obj)
    da_vals = da.var_values
    for row in structure.rows:
        coeffs, rhs = {}, row.rhs
        for var, c in row.coeffs.items():
            if var in structure.var_obj:
                coeffs[var] = c
            else:
                rhs -= c * da_vals[var]
        model.add_constr(row.name, coeffs, row.sense, rhs)
    offset = sum(c * da_vals[v] for v, c in structure.da_obj.items())
    return model, structure, offset


def _find_scenario(instance: Instance, scenario_id: str) -> Scenario:
    for s in instance.scenario_set.scenarios:
        if s.id == scenario_id:
            return s
    raise KeyError(f"unknown scenario {scenario_id!r}")


def clear_rtm(
    instance: Instance,
    da: DaSchedule,
    scenario_id: str,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> RtDispatch:
    """Solve one scenario's re-dispatch; pure function of its inputs."""
    model, structure, offset = build_rtm(instance, da, scenario_id)
    sol = solve(model, tol)
    if sol.status is not LpStatus.OPTIMAL:
        raise RtmError(
            f"real-time dispatch for scenario {scenario_id!r} ended "
            f"{sol.status.value}; shedding/curtailment backstops should prevent this"
        )
    sfx = structure.suffix
    hours = instance.hours
    p = sol.primal
    return RtDispatch(
        scenario_id=scenario_id,
        r_up={(g.id, t): p[_ru(g.id, t, sfx)] for g in instance.units for t in hours},
        r_down={(g.id, t): p[_rd(g.id, t, sfx)] for g in instance.units for t in hours},
        commitment={(g.id, t): p[_urt(g.id, t, sfx)] for g in instance.units for t in hours},
        startup_cost={(g.id, t): p[_crt(g.id, t, sfx)] for g in instance.units for t in hours},
        curtailment={(k.id, t): p[_cr(k.id, t, sfx)] for k in instance.vre_units for t in hours},
        shed={(n, t): p[_sh(n, t, sfx)] for n in instance.network.buses for t in hours},
        angle={(n, t): p[_th(n, t, sfx)] for n in instance.network.buses for t in hours},
        f_rt=sol.objective + offset,
        lmp={(n, t): sol.duals[f"rt_bal[{n},{t}]{sfx}"]
             for n in instance.network.buses for t in hours},
    )


def thread_count(requested: int | None = None) -> int:
    """Scenario fan-out width; MARKET_COORD_THREADS overrides the default of 1."""
    if requested is not None:
        return max(1, requested)
    env = os.environ.get("MARKET_COORD_THREADS")
    return max(1, int(env)) if env else 1


def expected_rt_cost(
    instance: Instance,
    da: DaSchedule,
    tol: ToleranceConfig = DEFAULT_TOL,
    threads: int | None = None,
) -> tuple[float, list[RtDispatch]]:
    """Probability-weighted re-dispatch cost over all scenarios.

    Scenario solves are independent; reduction runs in scenario order for
    reproducible floating-point totals regardless of the fan-out width.
    """
    scenarios = instance.scenario_set.scenarios
    workers = thread_count(threads)
    if workers > 1 and len(scenarios) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            dispatches = list(
                pool.map(lambda s: clear_rtm(instance, da, s.id, tol), scenarios)
            )
    else:
        dispatches = [clear_rtm(instance, da, s.id, tol) for s in scenarios]
    total = sum(s.probability * d.f_rt for s, d in zip(scenarios, dispatches))
    return total, dispatches
