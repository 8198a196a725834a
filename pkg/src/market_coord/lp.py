"""Thin LP layer over scipy's HiGHS backend with mandatory dual extraction.

Sign convention (minimization): duals of ">="-constraints are >= 0, duals of
"<="-constraints are <= 0, equality duals are free. Every optimal solve is
certified: primal feasibility, primal/dual objective gap, and complementary
slackness residuals are computed and the first two are enforced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

__all__ = [
    "LpModel",
    "LpSolution",
    "LpStatus",
    "Row",
    "SolverError",
    "ToleranceConfig",
    "solve",
    "diagnose_infeasibility",
    "certificate_log",
]

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)


class SolverError(RuntimeError):
    """Numerical breakdown or unexpected solver status (not infeasible/unbounded)."""


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class ToleranceConfig:
    feas_tol: float = 1e-6  # absolute primal feasibility
    gap_tol: float = 1e-6  # relative primal/dual objective gap
    comp_tol: float = 1e-5  # complementary slackness residual (advisory)


DEFAULT_TOL = ToleranceConfig()


@dataclass
class Row:
    """A linear constraint: sum(coeffs[v] * v) `sense` rhs.

    Coefficient keys are variable names; builders may include names that are
    substituted or coupled in later (bid quantities, day-ahead schedules).
    """

    name: str
    coeffs: dict[str, float]
    sense: str
    rhs: float


class LpModel:
    """Sparse LP in named-variable / named-constraint form (minimization)."""

    def __init__(self, name: str = "lp"):
        self.name = name
        self.var_names: list[str] = []
        self._var_index: dict[str, int] = {}
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.obj: list[float] = []
        self.con_names: list[str] = []
        self._con_index: dict[str, int] = {}
        self.con_rows: list[dict[int, float]] = []
        self.con_sense: list[str] = []
        self.con_rhs: list[float] = []
        self.obj_offset: float = 0.0

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_cons(self) -> int:
        return len(self.con_names)

    def add_var(
        self,
        name: str,
        lb: float = -math.inf,
        ub: float = math.inf,
        obj: float = 0.0,
    ) -> str:
        if name in self._var_index:
            raise ValueError(f"duplicate variable id {name!r}")
        if not math.isfinite(obj):
            raise ValueError(f"non-finite objective coefficient for {name!r}")
        self._var_index[name] = len(self.var_names)
        self.var_names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self.obj.append(obj)
        return name

    def add_obj(self, name: str, coeff: float) -> None:
        """Accumulate an objective coefficient onto an existing variable."""
        self.obj[self._var_index[name]] += coeff

    def has_var(self, name: str) -> bool:
        return name in self._var_index

    def add_constr(self, name: str, coeffs: dict[str, float], sense: str, rhs: float) -> str:
        if name in self._con_index:
            raise ValueError(f"duplicate constraint id {name!r}")
        if sense not in _SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        if not math.isfinite(rhs):
            raise ValueError(f"non-finite rhs in {name!r}")
        row: dict[int, float] = {}
        for var, c in coeffs.items():
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient in {name!r}")
            if c == 0.0:
                continue
            row[self._var_index[var]] = row.get(self._var_index[var], 0.0) + c
        self._con_index[name] = len(self.con_names)
        self.con_names.append(name)
        self.con_rows.append(row)
        self.con_sense.append(sense)
        self.con_rhs.append(rhs)
        return name

    def add_row(self, row: Row) -> str:
        return self.add_constr(row.name, row.coeffs, row.sense, row.rhs)

    def to_lp_text(self) -> str:
        """Dump in a readable LP-like text format (debugging aid)."""
        lines = [f"\\ model {self.name}", "Minimize"]
        terms = [
            f"{c:+g} {v}" for v, c in zip(self.var_names, self.obj) if c != 0.0
        ]
        lines.append(" obj: " + " ".join(terms) if terms else " obj: 0")
        lines.append("Subject To")
        for name, row, sense, rhs in zip(
            self.con_names, self.con_rows, self.con_sense, self.con_rhs
        ):
            body = " ".join(f"{c:+g} {self.var_names[j]}" for j, c in sorted(row.items()))
            lines.append(f" {name}: {body} {sense} {rhs:g}")
        lines.append("Bounds")
        for v, lo, hi in zip(self.var_names, self.lb, self.ub):
            lines.append(f" {lo:g} <= {v} <= {hi:g}")
        lines.append("End")
        return "\n".join(lines)


@dataclass
class LpCertificates:
    primal_residual: float
    duality_gap: float  # relative
    complementarity: float


@dataclass
class LpSolution:
    status: LpStatus
    objective: float | None = None
    primal: dict[str, float] = field(default_factory=dict)
    duals: dict[str, float] = field(default_factory=dict)
    reduced_costs: dict[str, float] = field(default_factory=dict)
    certificates: LpCertificates | None = None


# Optional global log of solve certificates, used by the acceptance suite to
# audit every solve performed in a run. Disabled unless a list is installed.
_certificate_log: list[tuple[str, LpCertificates]] | None = None


def certificate_log(enable: bool) -> list[tuple[str, LpCertificates]]:
    """Enable/disable global certificate collection; returns the live list."""
    global _certificate_log
    _certificate_log = [] if enable else None
    return _certificate_log if _certificate_log is not None else []


def _matrices(model: LpModel):
    """Split rows into equality and <= blocks (>= rows are negated)."""
    eq_idx, ub_idx, ub_sign = [], [], []
    for j, sense in enumerate(model.con_sense):
        if sense == EQ:
            eq_idx.append(j)
        else:
            ub_idx.append(j)
            ub_sign.append(1.0 if sense == LE else -1.0)

    def build(indices, signs=None):
        data, ri, ci = [], [], []
        rhs = []
        for r, j in enumerate(indices):
            s = 1.0 if signs is None else signs[r]
            for col, c in model.con_rows[j].items():
                data.append(s * c)
                ri.append(r)
                ci.append(col)
            rhs.append(s * model.con_rhs[j])
        mat = sparse.csr_matrix(
            (data, (ri, ci)), shape=(len(indices), model.n_vars)
        )
        return mat, np.array(rhs)

    A_eq, b_eq = build(eq_idx)
    A_ub, b_ub = build(ub_idx, ub_sign)
    return eq_idx, ub_idx, ub_sign, A_eq, b_eq, A_ub, b_ub


def solve(model: LpModel, tol: ToleranceConfig = DEFAULT_TOL) -> LpSolution:
    """Solve `model` and return primal/dual certificates.

    Raises SolverError when HiGHS reports a numerical failure, or when an
    "optimal" result violates the feasibility/duality-gap certificates.
    Infeasible and unbounded are ordinary statuses, not errors.
    """
    eq_idx, ub_idx, ub_sign, A_eq, b_eq, A_ub, b_ub = _matrices(model)
    c = np.array(model.obj)
    bounds = [
        (None if lo == -math.inf else lo, None if hi == math.inf else hi)
        for lo, hi in zip(model.lb, model.ub)
    ]
    res = linprog(
        c,
        A_ub=A_ub if len(ub_idx) else None,
        b_ub=b_ub if len(ub_idx) else None,
        A_eq=A_eq if len(eq_idx) else None,
        b_eq=b_eq if len(eq_idx) else None,
        bounds=bounds,
        method="highs",
    )
    if res.status == 2:
        return LpSolution(status=LpStatus.INFEASIBLE)
    if res.status == 3:
        return LpSolution(status=LpStatus.UNBOUNDED)
    if res.status != 0:
        raise SolverError(f"solver failure on {model.name!r}: {res.message}")

    x = np.asarray(res.x)
    primal = dict(zip(model.var_names, x.tolist()))

    duals: dict[str, float] = {}
    if len(eq_idx):
        for r, j in enumerate(eq_idx):
            duals[model.con_names[j]] = float(res.eqlin.marginals[r])
    if len(ub_idx):
        for r, j in enumerate(ub_idx):
            # negated ">=" rows: dual of the original row flips sign back
            duals[model.con_names[j]] = float(ub_sign[r] * res.ineqlin.marginals[r])

    zl = np.asarray(res.lower.marginals) if model.n_vars else np.zeros(0)
    zu = np.asarray(res.upper.marginals) if model.n_vars else np.zeros(0)
    reduced = dict(zip(model.var_names, (zl + zu).tolist()))

    # certificates
    feas = 0.0
    if len(eq_idx):
        feas = max(feas, float(np.max(np.abs(A_eq @ x - b_eq))))
    if len(ub_idx):
        feas = max(feas, float(np.max(np.maximum(A_ub @ x - b_ub, 0.0))))
    lbv = np.array([lo if lo != -math.inf else -np.inf for lo in model.lb])
    ubv = np.array([hi if hi != math.inf else np.inf for hi in model.ub])
    with np.errstate(invalid="ignore"):
        bnd_viol = np.maximum(lbv - x, 0.0) + np.maximum(x - ubv, 0.0)
    bnd_viol = np.where(np.isfinite(bnd_viol), bnd_viol, 0.0)
    if model.n_vars:
        feas = max(feas, float(np.max(bnd_viol)))

    dual_obj = 0.0
    if len(eq_idx):
        dual_obj += float(b_eq @ res.eqlin.marginals)
    if len(ub_idx):
        dual_obj += float(b_ub @ res.ineqlin.marginals)
    finite_lb = np.isfinite(lbv)
    finite_ub = np.isfinite(ubv)
    dual_obj += float(np.sum(np.where(finite_lb, lbv, 0.0) * zl))
    dual_obj += float(np.sum(np.where(finite_ub, ubv, 0.0) * zu))
    gap = abs(res.fun - dual_obj) / max(1.0, abs(res.fun))

    comp = 0.0
    if len(ub_idx):
        slack = b_ub - A_ub @ x
        comp = max(comp, float(np.max(np.abs(slack * res.ineqlin.marginals))))
    lb_slack = np.where(finite_lb, x - np.where(finite_lb, lbv, 0.0), 0.0)
    ub_slack = np.where(finite_ub, np.where(finite_ub, ubv, 0.0) - x, 0.0)
    if model.n_vars:
        comp = max(comp, float(np.max(np.abs(lb_slack * zl))))
        comp = max(comp, float(np.max(np.abs(ub_slack * zu))))

    certs = LpCertificates(primal_residual=feas, duality_gap=gap, complementarity=comp)
    if _certificate_log is not None:
        _certificate_log.append((model.name, certs))
    if feas > tol.feas_tol:
        raise SolverError(
            f"{model.name!r}: primal residual {feas:.3e} exceeds {tol.feas_tol:g}"
        )
    if gap > tol.gap_tol:
        raise SolverError(
            f"{model.name!r}: duality gap {gap:.3e} exceeds {tol.gap_tol:g}"
        )
    return LpSolution(
        status=LpStatus.OPTIMAL,
        objective=float(res.fun) + model.obj_offset,
        primal=primal,
        duals=duals,
        reduced_costs=reduced,
        certificates=certs,
    )


def diagnose_infeasibility(model: LpModel, top: int = 10) -> list[str]:
    """Name the constraints that cannot be met, via an elastic relaxation.

    Adds nonnegative violation slacks to every row, minimizes the total
    violation, and reports rows carrying slack above tolerance.
    """
    elastic = LpModel(name=f"{model.name}-elastic")
    for v, lo, hi in zip(model.var_names, model.lb, model.ub):
        elastic.add_var(v, lb=lo, ub=hi)
    slack_of: dict[str, str] = {}
    for name, row, sense, rhs in zip(
        model.con_names, model.con_rows, model.con_sense, model.con_rhs
    ):
        coeffs = {model.var_names[j]: c for j, c in row.items()}
        if sense in (GE, EQ):
            sp = elastic.add_var(f"__sp[{name}]", lb=0.0, obj=1.0)
            coeffs[sp] = 1.0
            slack_of.setdefault(name, sp)
        if sense in (LE, EQ):
            sm = elastic.add_var(f"__sm[{name}]", lb=0.0, obj=1.0)
            coeffs[sm] = -1.0
            slack_of.setdefault(name, sm)
        elastic.add_constr(name, coeffs, sense, rhs)
    sol = solve(elastic)
    if sol.status is not LpStatus.OPTIMAL:
        return ["elastic diagnosis failed"]
    scored = []
    for name in model.con_names:
        viol = sum(
            sol.primal[v]
            for v in (f"__sp[{name}]", f"__sm[{name}]")
            if v in sol.primal
        )
        if viol > 1e-7:
            scored.append((viol, name))
    scored.sort(reverse=True)
    return [f"{name} (violation {viol:.4g})" for viol, name in scored[:top]]
