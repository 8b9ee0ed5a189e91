"""Dense two-phase primal simplex for small linear programs.

Solves  min c.x  s.t.  A_eq x = b_eq,  A_le x <= b_le,  x >= 0.

Geared to best-response programs: a few dozen variables, redundant equality
rows tolerated, deterministic pivoting (Dantzig's rule, switching to Bland's
rule after a stall to guarantee termination), and an independent
feasibility/duality re-check of every optimal outcome computed from the raw
problem data rather than the final tableau.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NumericalBreakdown

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-11
DUALITY_REL_TOL = 1e-8
COMP_SLACK_TOL = 1e-8


class _Unbounded(Exception):
    def __init__(self, col):
        self.col = col


@dataclass
class LinearProgram:
    """Minimize objective.x subject to equality and <= rows, x >= 0."""

    objective: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_le: np.ndarray
    b_le: np.ndarray

    def __post_init__(self):
        self.objective = np.atleast_1d(np.asarray(self.objective, dtype=float))
        n = self.objective.shape[0]
        self.a_eq = np.asarray(self.a_eq, dtype=float).reshape(-1, n)
        self.a_le = np.asarray(self.a_le, dtype=float).reshape(-1, n)
        self.b_eq = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
        self.b_le = np.atleast_1d(np.asarray(self.b_le, dtype=float))
        if self.b_eq.shape[0] != self.a_eq.shape[0]:
            raise DimensionMismatch("b_eq length does not match a_eq rows")
        if self.b_le.shape[0] != self.a_le.shape[0]:
            raise DimensionMismatch("b_le length does not match a_le rows")
        for arr in (self.objective, self.a_eq, self.b_eq, self.a_le, self.b_le):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError("linear program has non-finite coefficients")

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]


@dataclass
class LpOutcome:
    status: str  # "optimal" | "infeasible" | "unbounded"
    solution: np.ndarray | None = None
    value: float | None = None
    duals_eq: np.ndarray | None = None
    duals_le: np.ndarray | None = None  # <= 0 for a minimization with <= rows
    diagnostics: dict = field(default_factory=dict)


def recheck_optimal(lp: LinearProgram, solution, duals_eq, duals_le) -> dict:
    """Feasibility/duality numbers recomputed from the raw LP data."""
    x = np.asarray(solution, dtype=float)
    value = float(lp.objective @ x)
    out = {"value": value}
    out["primal_eq_residual"] = (
        float(np.max(np.abs(lp.a_eq @ x - lp.b_eq))) if lp.b_eq.size else 0.0
    )
    le_slack = lp.b_le - lp.a_le @ x if lp.b_le.size else np.zeros(0)
    out["primal_le_violation"] = float(max(0.0, -le_slack.min())) if le_slack.size else 0.0
    out["x_min"] = float(x.min()) if x.size else 0.0
    dual_value = 0.0
    if lp.b_eq.size:
        dual_value += float(lp.b_eq @ duals_eq)
    if lp.b_le.size:
        dual_value += float(lp.b_le @ duals_le)
    out["duality_gap"] = abs(value - dual_value)
    rc = lp.objective.copy()
    if lp.b_eq.size:
        rc -= lp.a_eq.T @ duals_eq
    if lp.b_le.size:
        rc -= lp.a_le.T @ duals_le
    out["reduced_cost_min"] = float(rc.min()) if rc.size else 0.0
    out["dual_le_max"] = float(duals_le.max()) if lp.b_le.size else 0.0
    comp = 0.0
    if x.size:
        comp = max(comp, float(np.max(np.abs(x * rc))))
    if lp.b_le.size:
        comp = max(comp, float(np.max(np.abs(duals_le * le_slack))))
    out["complementary_slackness"] = comp
    return out


def solve_lp(
    lp: LinearProgram,
    feas_tol: float = FEAS_TOL,
    opt_tol: float = OPT_TOL,
    pivot_tol: float = PIVOT_TOL,
) -> LpOutcome:
    """Solve a small dense LP; deterministic for identical input bytes.

    Optimal outcomes carry a basic feasible solution, signed duals, and the
    re-check numbers in ``diagnostics["recheck"]``. Infeasible outcomes
    record the positive phase-1 optimum and a Farkas-style certificate.
    Raises NumericalBreakdown when pivoting or certification degrades.
    """
    n = lp.n_vars
    m_eq, m_le = lp.b_eq.shape[0], lp.b_le.shape[0]
    m = m_eq + m_le

    # standard form: columns [structural | slack | artificial], one
    # artificial per row (uniform initial basis)
    A = np.zeros((m, n + m_le))
    if m_eq:
        A[:m_eq, :n] = lp.a_eq
    if m_le:
        A[m_eq:, :n] = lp.a_le
        A[m_eq:, n:] = np.eye(m_le)
    b = np.concatenate([lp.b_eq, lp.b_le])
    cost = np.concatenate([lp.objective, np.zeros(m_le)])

    # flip rows to b >= 0, then equilibrate (max-abs row/column scaling)
    sign = np.where(b < 0, -1.0, 1.0)
    As = A * sign[:, None]
    bs = b * sign
    row_max = np.max(np.abs(As), axis=1, initial=0.0)
    row_scale = np.where(row_max > 0, 1.0 / np.where(row_max > 0, row_max, 1.0), 1.0)
    As = As * row_scale[:, None]
    bs = bs * row_scale
    col_max = np.max(np.abs(As), axis=0, initial=0.0)
    col_scale = np.where(col_max > 0, 1.0 / np.where(col_max > 0, col_max, 1.0), 1.0)
    As = As * col_scale[None, :]

    n_sl = n + m_le
    art0 = n_sl
    n_tot = n_sl + m
    T = np.zeros((m + 1, n_tot + 1))
    T[:m, :n_sl] = As
    T[:m, art0 : art0 + m] = np.eye(m)
    T[:m, -1] = bs
    basis = list(range(art0, art0 + m))

    diagnostics = {"iterations": 0, "bland": False}

    def run_phase(phase_cost: np.ndarray, barred: set[int], phase: int):
        T[-1, :] = 0.0
        T[-1, :-1][: phase_cost.shape[0]] = phase_cost
        for i, bv in enumerate(basis):
            coef = T[-1, bv]
            if coef != 0.0:
                T[-1, :] -= coef * T[i, :]
        stall = 0
        best = np.inf
        bland = False
        max_iters = 10000 + 100 * (m + n_tot)
        it = 0
        while True:
            it += 1
            diagnostics["iterations"] += 1
            if it > max_iters:
                raise NumericalBreakdown(
                    "simplex iteration cap exceeded",
                    {"phase": phase, **diagnostics},
                )
            rc = T[-1, :-1].copy()
            for j in barred:
                rc[j] = 0.0
            candidates = np.nonzero(rc < -opt_tol)[0]
            if candidates.size == 0:
                return
            if bland:
                col = int(candidates[0])
            else:
                col = int(candidates[np.argmin(rc[candidates])])
            colvals = T[:m, col]
            eligible = np.nonzero(colvals > pivot_tol)[0]
            if eligible.size == 0:
                if np.any(colvals > 0):
                    raise NumericalBreakdown(
                        "all pivot candidates below threshold",
                        {
                            "phase": phase,
                            "column": col,
                            "max_pivot": float(colvals.max()),
                            **diagnostics,
                        },
                    )
                if phase == 1:
                    raise NumericalBreakdown(
                        "phase-1 column with no positive entries",
                        {"phase": 1, "column": col, **diagnostics},
                    )
                raise _Unbounded(col)
            ratios = T[eligible, -1] / colvals[eligible]
            best_ratio = ratios.min()
            ties = eligible[ratios <= best_ratio + 1e-12]
            # lowest basic-variable index among ties: deterministic, and the
            # Bland leaving rule when bland is engaged
            row = int(ties[np.argmin([basis[i] for i in ties])])
            piv = T[row, col]
            T[row, :] /= piv
            colcopy = T[:, col].copy()
            colcopy[row] = 0.0
            T[...] -= np.outer(colcopy, T[row, :])
            T[:, col] = 0.0
            T[row, col] = 1.0
            basis[row] = col
            obj = -T[-1, -1]
            if obj < best - 1e-12:
                best = obj
                stall = 0
            else:
                stall += 1
                if not bland and stall > 2 * (m + n_tot):
                    bland = True
                    diagnostics["bland"] = True

    # phase 1: minimize the artificial total
    c1 = np.zeros(n_tot)
    c1[art0:] = 1.0
    try:
        run_phase(c1, barred=set(), phase=1)
    except _Unbounded:  # pragma: no cover - phase 1 objective is bounded
        raise NumericalBreakdown("phase 1 reported unbounded", diagnostics)
    phase1_value = -T[-1, -1]
    diagnostics["phase1_value"] = float(phase1_value)
    b_scale = 1.0 + (float(np.max(np.abs(b))) if b.size else 0.0)
    if phase1_value > feas_tol * b_scale:
        y = _basis_duals(lp, basis, c1, n, m_eq, m_le)
        return LpOutcome(
            status="infeasible",
            diagnostics={**diagnostics, "farkas_certificate": y.tolist()},
        )

    # drive leftover artificials out of the basis; rows that cannot pivot
    # are redundant and their artificial stays parked at level zero
    for i in range(m):
        if basis[i] >= art0:
            row_entries = np.abs(T[i, :n_sl])
            j = int(np.argmax(row_entries))
            if row_entries[j] > pivot_tol:
                piv = T[i, j]
                T[i, :] /= piv
                colcopy = T[:, j].copy()
                colcopy[i] = 0.0
                T -= np.outer(colcopy, T[i, :])
                T[:, j] = 0.0
                T[i, j] = 1.0
                basis[i] = j
            else:
                # redundant row: silence sub-threshold noise so later pivots
                # can never move the parked artificial off zero
                T[i, :n_sl][row_entries <= pivot_tol] = 0.0
                T[i, -1] = 0.0

    # phase 2 on the equilibrated objective
    c2 = np.zeros(n_tot)
    c2[:n_sl] = cost * col_scale
    barred = set(range(art0, n_tot))
    try:
        run_phase(c2, barred=barred, phase=2)
    except _Unbounded as e:
        return LpOutcome(
            status="unbounded",
            diagnostics={**diagnostics, "unbounded_column": int(e.col)},
        )

    # recover primal and duals from the raw (unscaled) data and the basis
    x_basic = _basis_solution(lp, basis, n, m_eq, m_le)
    x_full = np.zeros(n_sl)
    for i, bv in enumerate(basis):
        if bv < n_sl:
            x_full[bv] = x_basic[i]
        elif abs(x_basic[i]) > feas_tol * b_scale:
            raise NumericalBreakdown(
                "artificial variable stuck at nonzero level",
                {**diagnostics, "artificial_level": float(x_basic[i])},
            )
    if x_full.size and x_full.min() < -feas_tol * b_scale:
        raise NumericalBreakdown(
            "negative basic variable after refinement",
            {**diagnostics, "x_min": float(x_full.min())},
        )
    x_full = np.where(x_full < 0, 0.0, x_full)
    x = x_full[:n]
    value = float(lp.objective @ x)
    y = _basis_duals(lp, basis, np.concatenate([cost, np.zeros(m)]), n, m_eq, m_le)
    duals_eq = y[:m_eq]
    duals_le = y[m_eq:]

    checks = recheck_optimal(lp, x, duals_eq, duals_le)
    diagnostics["recheck"] = checks
    bad = (
        checks["primal_eq_residual"] > feas_tol * b_scale
        or checks["primal_le_violation"] > feas_tol * b_scale
        or checks["duality_gap"] > DUALITY_REL_TOL * (1.0 + abs(value))
        or checks["reduced_cost_min"] < -1e-7
        or checks["dual_le_max"] > 1e-8
        or checks["complementary_slackness"] > COMP_SLACK_TOL * b_scale * 10
    )
    if bad:
        raise NumericalBreakdown("optimality re-check failed", diagnostics)
    return LpOutcome(
        status="optimal",
        solution=x,
        value=value,
        duals_eq=duals_eq,
        duals_le=duals_le,
        diagnostics=diagnostics,
    )


def _basis_columns(lp: LinearProgram, basis, n, m_eq, m_le) -> np.ndarray:
    """Basis columns assembled from the raw standard-form data."""
    m = m_eq + m_le
    B = np.zeros((m, m))
    for k, bv in enumerate(basis):
        if bv < n:
            if m_eq:
                B[:m_eq, k] = lp.a_eq[:, bv]
            if m_le:
                B[m_eq:, k] = lp.a_le[:, bv]
        elif bv < n + m_le:
            B[m_eq + (bv - n), k] = 1.0
        else:
            B[bv - (n + m_le), k] = 1.0
    return B


def _basis_solution(lp, basis, n, m_eq, m_le) -> np.ndarray:
    B = _basis_columns(lp, basis, n, m_eq, m_le)
    b = np.concatenate([lp.b_eq, lp.b_le])
    try:
        return np.linalg.solve(B, b)
    except np.linalg.LinAlgError as e:
        raise NumericalBreakdown(f"singular basis on refinement: {e}")


def _basis_duals(lp, basis, cost_full, n, m_eq, m_le) -> np.ndarray:
    B = _basis_columns(lp, basis, n, m_eq, m_le)
    c_b = np.array([cost_full[bv] if bv < cost_full.shape[0] else 0.0 for bv in basis])
    try:
        return np.linalg.solve(B.T, c_b)
    except np.linalg.LinAlgError as e:
        raise NumericalBreakdown(f"singular basis on dual extraction: {e}")
