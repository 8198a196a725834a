"""Solver abstraction: statuses, dual sign convention, and certificates."""
import pytest

from market_coord.lp import (
    GE,
    LE,
    LpModel,
    LpStatus,
    diagnose_infeasibility,
    solve,
)


def test_one_variable_lower_bound_dual():
    model = LpModel()
    model.add_var("x", obj=1.0)
    model.add_constr("floor", {"x": 1.0}, GE, 3.0)
    sol = solve(model)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.primal["x"] == pytest.approx(3.0)
    assert sol.duals["floor"] == pytest.approx(1.0)


def test_unbounded_detection():
    model = LpModel()
    model.add_var("x", obj=-1.0, lb=0.0)
    sol = solve(model)
    assert sol.status is LpStatus.UNBOUNDED


def test_infeasible_detection_and_diagnosis():
    model = LpModel()
    model.add_var("x", lb=0.0, ub=1.0)
    model.add_constr("too_high", {"x": 1.0}, GE, 5.0)
    sol = solve(model)
    assert sol.status is LpStatus.INFEASIBLE
    names = " ".join(diagnose_infeasibility(model))
    assert "too_high" in names


def test_dual_signs_follow_min_convention():
    # min -x s.t. x <= 4 (binding <= row): dual must be <= 0
    model = LpModel()
    model.add_var("x", obj=-1.0, lb=0.0)
    model.add_constr("cap", {"x": 1.0}, LE, 4.0)
    sol = solve(model)
    assert sol.primal["x"] == pytest.approx(4.0)
    assert sol.duals["cap"] <= 1e-9
    assert sol.duals["cap"] == pytest.approx(-1.0)


def test_certificates_within_tolerances():
    model = LpModel()
    model.add_var("x", obj=2.0, lb=0.0)
    model.add_var("y", obj=3.0, lb=0.0)
    model.add_constr("mix", {"x": 1.0, "y": 1.0}, GE, 10.0)
    model.add_constr("floor_x", {"x": 1.0}, GE, 2.0)
    sol = solve(model)
    assert sol.status is LpStatus.OPTIMAL
    certs = sol.certificates
    assert certs.primal_residual <= 1e-6
    assert certs.duality_gap <= 1e-6
    assert certs.complementarity <= 1e-5


def test_resolve_is_deterministic_in_objective():
    def build():
        model = LpModel()
        model.add_var("x", obj=1.0)
        model.add_var("y", obj=1.0)
        model.add_constr("tie", {"x": 1.0, "y": 1.0}, GE, 5.0)
        return model

    a = solve(build())
    b = solve(build())
    assert a.objective == pytest.approx(b.objective, rel=1e-6)


def test_duplicate_variable_name_rejected():
    model = LpModel()
    model.add_var("x")
    with pytest.raises(ValueError):
        model.add_var("x")


def test_nonfinite_coefficient_rejected():
    model = LpModel()
    with pytest.raises(ValueError):
        model.add_var("x", obj=float("nan"))


def test_equality_row_free_dual_sign():
    # min x + y s.t. x + y = 7, x >= 0, y >= 0: equality dual may be any sign
    model = LpModel()
    model.add_var("x", obj=1.0, lb=0.0)
    model.add_var("y", obj=1.0, lb=0.0)
    model.add_constr("bal", {"x": 1.0, "y": 1.0}, "=", 7.0)
    sol = solve(model)
    assert sol.objective == pytest.approx(7.0)
    assert sol.duals["bal"] == pytest.approx(1.0)


def test_lp_text_dump_mentions_rows_and_bounds():
    model = LpModel()
    model.add_var("x", obj=1.0, lb=0.0, ub=2.0)
    model.add_constr("floor", {"x": 1.0}, GE, 1.0)
    text = model.to_lp_text()
    assert "floor" in text and "x" in text
