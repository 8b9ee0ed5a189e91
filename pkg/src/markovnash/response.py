"""Per-player best responses via occupation-measure linear programs.

Against fixed opponents, a player faces a single-controller constrained
MDP. Its optimal stationary responses are exactly the optima of a small LP
over the player's occupation measures: balance rows (one per state, kept
even though they are linearly dependent), budget rows for each constrained
cost, and a normalization row. This module builds and solves that LP,
recovers the optimal policy, and measures optimality gaps and feasibility
margins of candidate policies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GapUndefined, NumericalBreakdown
from .lp import LinearProgram, solve_lp
from .model import GameModel
from .stationary import (
    MultiPolicy,
    OccupationMeasure,
    StationaryPolicy,
    long_run_cost,
    marginal_cost,
    occupation_measure,
    policy_from_occupation,
    replace_coordinate,
)

CONSTRAINT_TOL = 1e-9
IDENTITY_TOL = 1e-8


@dataclass
class BestResponseOutcome:
    """Optimal response of one player against fixed opponents."""

    owner: int
    status: str  # "optimal" | "infeasible"
    z_star: OccupationMeasure | None = None
    value: float | None = None
    policy: StationaryPolicy | None = None
    constraint_values: np.ndarray | None = None
    # recorded consistency check: max |occupation(policy) - z_star|
    identity_gap: float | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass
class GapReport:
    owner: int
    gap: float
    feasible: bool
    slacks: np.ndarray
    current_cost: float
    best_value: float


def build_lp(model: GameModel, i: int, u: MultiPolicy) -> LinearProgram:
    """Best-response LP for player i against u's opponents.

    Variables follow the player's flat pair order (state-major,
    action-minor, declaration order). Equality rows: one balance row per
    state, then the normalization row. Inequality rows: one per constrained
    cost index.
    """
    player = model.players[i]
    n, K = player.n_states, player.n_pairs
    a_eq = np.zeros((n + 1, K))
    for k, (y, a) in enumerate(player.pairs):
        row = player.transitions[y][a]
        a_eq[:n, k] = -row
        a_eq[y, k] += 1.0
    a_eq[n, :] = 1.0
    b_eq = np.zeros(n + 1)
    b_eq[n] = 1.0

    objective = marginal_cost(model, i, 0, u).values
    bounds = model.bounds(i)
    b = bounds.shape[0]
    a_le = np.zeros((b, K))
    for j in range(1, b + 1):
        a_le[j - 1] = marginal_cost(model, i, j, u).values
    return LinearProgram(objective, a_eq, b_eq, a_le, bounds.copy())


def best_response(model: GameModel, i: int, u: MultiPolicy) -> BestResponseOutcome:
    """Solve LP(i, u) and recover an optimal stationary response.

    Infeasible means player i has no stationary policy meeting its budgets
    against these opponents. An unbounded verdict is impossible (the
    variables lie in a probability simplex) and is surfaced as a defect.
    """
    lp = build_lp(model, i, u)
    out = solve_lp(lp)
    if out.status == "infeasible":
        return BestResponseOutcome(i, "infeasible", diagnostics=out.diagnostics)
    if out.status == "unbounded":
        raise NumericalBreakdown(
            f"LP for player {i} reported unbounded on a bounded feasible set",
            out.diagnostics,
        )
    z = OccupationMeasure(i, out.solution)
    policy = policy_from_occupation(model.players[i], z)
    b = model.bounds(i).shape[0]
    constraint_values = np.array(
        [float(lp.a_le[j] @ z.z) for j in range(b)]
    )
    z_back = occupation_measure(model.players[i], policy)
    identity_gap = float(np.max(np.abs(z_back.z - z.z))) if z.z.size else 0.0
    return BestResponseOutcome(
        i,
        "optimal",
        z_star=z,
        value=out.value,
        policy=policy,
        constraint_values=constraint_values,
        identity_gap=identity_gap,
        diagnostics=out.diagnostics,
    )


def current_costs(model: GameModel, u: MultiPolicy, i: int) -> np.ndarray:
    """Long-run costs (objective first, then constrained indices) of u for i."""
    b = model.n_constraints(i)
    return np.array([long_run_cost(model, u, i, j) for j in range(b + 1)])


def best_response_gap(model: GameModel, i: int, u: MultiPolicy) -> GapReport:
    """How far player i's current policy is from its best response.

    gap = current objective - LP optimum; feasible tests the player's own
    budgets at u. When the LP is infeasible although u is strictly
    i-feasible, the inconsistency is surfaced as GapUndefined instead of
    being masked.
    """
    costs = current_costs(model, u, i)
    bounds = model.bounds(i)
    slacks = bounds - costs[1:]
    min_slack = float(slacks.min()) if slacks.size else math.inf
    feasible = min_slack >= -CONSTRAINT_TOL
    br = best_response(model, i, u)
    if br.status == "infeasible":
        if min_slack > CONSTRAINT_TOL:
            raise GapUndefined(
                f"player {i}: LP infeasible but current policy has slack "
                f"{min_slack:g}"
            )
        return GapReport(i, math.inf, feasible, slacks, float(costs[0]), math.inf)
    return GapReport(
        i,
        float(costs[0] - br.value),
        feasible,
        slacks,
        float(costs[0]),
        float(br.value),
    )


def slater_margin(
    model: GameModel, i: int, u: MultiPolicy, v_i: StationaryPolicy
) -> float:
    """Worst constraint margin of candidate v_i against these opponents.

    Returns min_j (bound_j - long-run constrained cost j of [u with v_i]);
    +inf when the player has no constraints. This is a per-opponent margin:
    a uniform margin over all opponent behaviors is not decidable here, so
    sweep with :func:`slater_margin_sweep` for evidence over a list.
    """
    b = model.n_constraints(i)
    if b == 0:
        return math.inf
    v = replace_coordinate(u, i, v_i)
    bounds = model.bounds(i)
    return float(
        min(bounds[j - 1] - long_run_cost(model, v, i, j) for j in range(1, b + 1))
    )


def slater_margin_sweep(
    model: GameModel, i: int, opponents: list[MultiPolicy], v_i: StationaryPolicy
) -> float:
    """Minimum margin of v_i over a caller-supplied list of opponent
    multi-policies. Evidence for a uniform margin, not proof."""
    return min(slater_margin(model, i, u, v_i) for u in opponents)
