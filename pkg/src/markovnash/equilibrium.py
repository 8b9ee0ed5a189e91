"""Equilibrium search and certification.

The solver runs damped best-response dynamics on occupation measures: each
sweep solves every player's best-response LP against the current opponents,
moves that player's occupation measure part-way toward the LP optimum, and
re-derives the player's policy by row normalization. Damping in measure
space is safe because the balance and normalization rows do not depend on
the opponents, so convex combinations stay structurally feasible; budget
feasibility is re-checked every sweep since marginal costs move with the
opponents' policies.

Convergence of the dynamics is not guaranteed; restarts from random
initializations mitigate cycling, and a non-converged run honestly reports
its best iterate. Every candidate is certified by an independent verifier
that relies only on freshly built LPs against the fixed candidate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch
from .model import GameModel
from .response import best_response, best_response_gap, build_lp
from .stationary import (
    MultiPolicy,
    OccupationMeasure,
    StationaryPolicy,
    long_run_cost_product_chain,
    occupation_measure,
    policy_from_occupation,
    random_policy,
    uniform_multi_policy,
)
from .lp import solve_lp

# product state spaces larger than this skip the explicit product-chain
# identity check (exponential in the player count)
PRODUCT_CHAIN_LIMIT = 4096


@dataclass
class SolverConfig:
    epsilon: float = 1e-6
    feasibility_tol: float = 1e-8
    max_iters: int = 500
    damping: float = 0.5
    sweep: str = "gauss-seidel"  # or "jacobi"
    init: str = "uniform"  # "uniform" | "given" | "random"
    init_policy: MultiPolicy | None = None
    seed: int = 0
    restarts: int = 5

    def __post_init__(self):
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must lie in (0, 1]")
        if self.epsilon <= 0 or self.feasibility_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.sweep not in ("gauss-seidel", "jacobi"):
            raise ValueError(f"unknown sweep mode {self.sweep!r}")
        if self.init not in ("uniform", "given", "random"):
            raise ValueError(f"unknown init mode {self.init!r}")
        if self.init == "given" and self.init_policy is None:
            raise ValueError("init='given' requires init_policy")

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "feasibility_tol": self.feasibility_tol,
            "max_iters": self.max_iters,
            "damping": self.damping,
            "sweep": self.sweep,
            "init": self.init,
            "seed": self.seed,
            "restarts": self.restarts,
        }


@dataclass
class EquilibriumResult:
    status: str  # "converged" | "no-convergence" | "player-infeasible"
    multi_policy: MultiPolicy | None
    occupations: list[OccupationMeasure] | None
    costs: list[np.ndarray] | None  # per player: objective then constrained
    gaps: np.ndarray | None
    slacks: list[np.ndarray] | None
    trace: list[float] = field(default_factory=list)
    selection_log: list[tuple[int, int]] = field(default_factory=list)
    iterations: int = 0
    restarts_used: int = 0
    infeasible_player: int | None = None

    @property
    def max_gap(self) -> float:
        if self.gaps is None or len(self.gaps) == 0:
            return math.inf
        return float(np.max(self.gaps))


@dataclass
class PlayerCheck:
    player: int
    feasible: bool
    gap: float
    slacks: np.ndarray
    costs: np.ndarray
    identity_gap: float | None  # occupation-path vs product-chain cost


@dataclass
class VerificationReport:
    verdict: bool
    epsilon: float
    feasibility_tol: float
    players: list[PlayerCheck]
    identity_checked: bool

    @property
    def max_gap(self) -> float:
        return max(p.gap for p in self.players)


def _initial_policies(model, config, attempt) -> MultiPolicy:
    if attempt == 0 and config.init == "given":
        return config.init_policy
    if attempt == 0 and config.init == "uniform":
        return uniform_multi_policy(model)
    # fresh random policies; deterministic per (seed, attempt)
    rng = np.random.default_rng([config.seed, attempt])
    return MultiPolicy([random_policy(p, rng) for p in model.players])


def _measure_point(model, u, config):
    """Fixed-u gaps/feasibility for every player (fresh LPs)."""
    gaps = np.zeros(model.n_players)
    slacks = []
    costs = []
    feasible = True
    for i in range(model.n_players):
        report = best_response_gap(model, i, u)
        gaps[i] = report.gap
        slacks.append(report.slacks)
        costs.append(
            np.concatenate([[report.current_cost], model.bounds(i) - report.slacks])
        )
        if report.slacks.size and report.slacks.min() < -config.feasibility_tol:
            feasible = False
    return gaps, slacks, costs, feasible


def solve(model: GameModel, config: SolverConfig | None = None) -> EquilibriumResult:
    """Search for an equilibrium by damped best-response dynamics.

    Gauss-Seidel sweeps (default) rebuild each player's marginal costs from
    the opponents' freshest policies; Jacobi sweeps respond to the policies
    frozen at the sweep start. Deterministic per (model, config).
    """
    config = config or SolverConfig()
    n = model.n_players
    best_candidate = None
    init_infeasible_counts = np.zeros(n, dtype=int)
    n_attempts = 1 + config.restarts

    for attempt in range(n_attempts):
        u0 = _initial_policies(model, config, attempt)
        z = [occupation_measure(p, u0[i]) for i, p in enumerate(model.players)]
        u = MultiPolicy(list(u0.policies))
        for i in range(n):
            if best_response(model, i, u).status == "infeasible":
                init_infeasible_counts[i] += 1
        trace = []
        selections: set[tuple[int, int]] = set()
        converged = False
        iterations = 0

        gaps = slacks = costs = None
        for it in range(config.max_iters):
            iterations = it + 1
            frozen = MultiPolicy(list(u.policies)) if config.sweep == "jacobi" else None
            new_z = list(z)
            new_pols = list(u.policies)
            for i in range(n):
                u_eval = frozen if frozen is not None else u
                br = best_response(model, i, u_eval)
                if br.status == "infeasible":
                    continue  # keep the current iterate for this player
                mixed = (1.0 - config.damping) * z[i].z + config.damping * br.z_star.z
                zi = OccupationMeasure(i, mixed)
                pol = policy_from_occupation(model.players[i], zi)
                selections.update((i, x) for x in pol.uniform_fill_states)
                new_z[i] = zi
                new_pols[i] = pol
                if frozen is None:
                    z[i] = zi
                    u = MultiPolicy(list(u.policies[:i]) + [pol] + list(u.policies[i + 1 :]))
            if frozen is not None:
                z = new_z
                u = MultiPolicy(new_pols)
            # measure the post-sweep point with fresh LPs at the fixed u
            gaps, slacks, costs, feasible = _measure_point(model, u, config)
            trace.append(float(np.max(gaps)))
            if feasible and float(np.max(gaps)) <= config.epsilon:
                converged = True
                break

        if gaps is None:
            gaps, slacks, costs, feasible = _measure_point(model, u, config)
        candidate = EquilibriumResult(
            status="converged" if converged else "no-convergence",
            multi_policy=u,
            occupations=z,
            costs=costs,
            gaps=gaps,
            slacks=slacks,
            trace=trace,
            selection_log=sorted(selections),
            iterations=iterations,
            restarts_used=attempt,
        )
        if converged:
            return candidate
        if best_candidate is None or _better(candidate, best_candidate):
            best_candidate = candidate

    if np.any(init_infeasible_counts == n_attempts):
        i = int(np.argmax(init_infeasible_counts == n_attempts))
        return EquilibriumResult(
            status="player-infeasible",
            multi_policy=best_candidate.multi_policy,
            occupations=best_candidate.occupations,
            costs=best_candidate.costs,
            gaps=best_candidate.gaps,
            slacks=best_candidate.slacks,
            trace=best_candidate.trace,
            selection_log=best_candidate.selection_log,
            iterations=best_candidate.iterations,
            restarts_used=config.restarts,
            infeasible_player=i,
        )
    best_candidate.restarts_used = config.restarts
    return best_candidate


def _better(a: EquilibriumResult, b: EquilibriumResult) -> bool:
    a_feas = all(s.size == 0 or s.min() >= -1e-8 for s in a.slacks)
    b_feas = all(s.size == 0 or s.min() >= -1e-8 for s in b.slacks)
    if a_feas != b_feas:
        return a_feas
    return a.max_gap < b.max_gap


def verify_equilibrium(
    model: GameModel,
    u: MultiPolicy,
    epsilon: float = 1e-6,
    feasibility_tol: float = 1e-8,
) -> VerificationReport:
    """Ground-truth certificate for a candidate multi-policy.

    For each player: budget feasibility of u, the best-response gap from a
    freshly built LP against the fixed u, and constraint slacks. PASS iff
    every gap <= epsilon and every player is feasible. On small product
    state spaces the report also checks that each long-run cost computed
    through occupation measures equals the explicit product-chain value.
    Certifies optimality against stationary deviations (which suffice for
    this model class).
    """
    players = []
    verdict = True
    product_size = math.prod(p.n_states for p in model.players)
    check_identity = product_size <= PRODUCT_CHAIN_LIMIT
    for i in range(model.n_players):
        report = best_response_gap(model, i, u)
        costs = np.concatenate(
            [[report.current_cost], model.bounds(i) - report.slacks]
        )
        feasible = report.slacks.size == 0 or report.slacks.min() >= -feasibility_tol
        identity_gap = None
        if check_identity:
            identity_gap = 0.0
            for j in range(model.n_constraints(i) + 1):
                direct = long_run_cost_product_chain(model, u, i, j)
                identity_gap = max(identity_gap, abs(direct - costs[j]))
        if not feasible or report.gap > epsilon:
            verdict = False
        players.append(
            PlayerCheck(i, feasible, report.gap, report.slacks, costs, identity_gap)
        )
    return VerificationReport(verdict, epsilon, feasibility_tol, players, check_identity)


def fixed_point_residual(model: GameModel, z: list[OccupationMeasure]) -> float:
    """Distance of a measure profile from being reproduced by best responses.

    Recovers the policies g from z, then for each player measures how far
    z_i is from the optimal set of its LP against g: the larger of the
    objective sub-optimality |cost(z_i) - optimum| and z_i's feasibility
    violation in that LP. Zero (within tolerance) exactly at candidates the
    solver is looking for.
    """
    if len(z) != model.n_players:
        raise DimensionMismatch("one occupation measure per player required")
    g = MultiPolicy(
        [policy_from_occupation(p, z[i]) for i, p in enumerate(model.players)]
    )
    worst = 0.0
    for i in range(model.n_players):
        lp = build_lp(model, i, g)
        out = solve_lp(lp)
        zi = z[i].z
        eq_violation = float(np.max(np.abs(lp.a_eq @ zi - lp.b_eq)))
        le_violation = 0.0
        if lp.b_le.size:
            le_violation = float(max(0.0, np.max(lp.a_le @ zi - lp.b_le)))
        if out.status != "optimal":
            return math.inf
        value_gap = abs(float(lp.objective @ zi) - out.value)
        worst = max(worst, value_gap, eq_violation, le_violation)
    return worst
