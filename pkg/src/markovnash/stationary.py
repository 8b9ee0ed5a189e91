"""Stationary-policy algebra.

Induced transition matrices, steady states, occupation measures, recovery of
policies from occupation measures, marginalized coupled costs, and the exact
long-run average cost. Everything here is a pure function of immutable
inputs; under the one-recurrent-class assumption none of it depends on the
initial distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotUnichain
from .model import GameModel, PlayerModel

STEADY_STATE_TOL = 1e-10
# Below this state mass the policy-recovery quotient is considered undefined
# and the uniform selection applies.
ZERO_MASS_TOL = 1e-12
OCCUPATION_SUM_TOL = 1e-10
PRODUCT_CHAIN_TOL = 1e-9


@dataclass
class StationaryPolicy:
    """Per-state action distributions for one player."""

    owner: int
    dist_by_state: list[np.ndarray]
    # states where the zero-mass uniform rule fired during recovery from an
    # occupation measure (empty for directly constructed policies)
    uniform_fill_states: tuple[int, ...] = ()

    def __post_init__(self):
        self.dist_by_state = [np.asarray(d, dtype=float) for d in self.dist_by_state]


@dataclass
class MultiPolicy:
    """One stationary policy per player, indexed by owner."""

    policies: list[StationaryPolicy]

    def __post_init__(self):
        owners = [p.owner for p in self.policies]
        if owners != list(range(len(owners))):
            raise DimensionMismatch(f"policy owners {owners} are not 0..N-1")

    def __getitem__(self, i: int) -> StationaryPolicy:
        return self.policies[i]

    def __len__(self) -> int:
        return len(self.policies)


@dataclass
class OccupationMeasure:
    """Long-run frequency of one player's state-action pairs (flat order).

    Entries above -1e-12 are clipped to 0 on construction; the total must be
    1 within 1e-10.
    """

    owner: int
    z: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if np.any(z < -ZERO_MASS_TOL):
            raise ValueError(
                f"occupation measure for player {self.owner} has negative entries"
            )
        z = np.where(z < 0, 0.0, z)
        if abs(float(z.sum()) - 1.0) > OCCUPATION_SUM_TOL:
            raise ValueError(
                f"occupation measure for player {self.owner} sums to {z.sum()!r}"
            )
        self.z = z

    def state_marginal(self, player: PlayerModel) -> np.ndarray:
        out = np.zeros(player.n_states)
        np.add.at(out, [x for x, _ in player.pairs], self.z)
        return out


@dataclass
class MarginalCostTable:
    """A coupled cost averaged over opponents' stationary state-action laws,
    leaving the owner's pair free (flat order over the owner's pairs)."""

    owner: int
    cost_index: int
    values: np.ndarray


def uniform_policy(player: PlayerModel) -> StationaryPolicy:
    return StationaryPolicy(
        player.player_id,
        [np.full(m, 1.0 / m) for m in player.n_actions],
    )


def random_policy(player: PlayerModel, rng: np.random.Generator) -> StationaryPolicy:
    return StationaryPolicy(
        player.player_id,
        [rng.dirichlet(np.ones(m)) for m in player.n_actions],
    )


def uniform_multi_policy(model: GameModel) -> MultiPolicy:
    return MultiPolicy([uniform_policy(p) for p in model.players])


def induced_transition(player: PlayerModel, policy: StationaryPolicy) -> np.ndarray:
    """State transition matrix of the chain under a stationary policy."""
    if policy.owner != player.player_id:
        raise DimensionMismatch(
            f"policy owner {policy.owner} != player {player.player_id}"
        )
    if len(policy.dist_by_state) != player.n_states:
        raise DimensionMismatch("policy has wrong number of states")
    rows = []
    for x in range(player.n_states):
        d = policy.dist_by_state[x]
        if d.shape != (player.n_actions[x],):
            raise DimensionMismatch(f"policy row at state {x} has wrong length")
        rows.append(d @ player.transitions[x])
    return np.vstack(rows)


def steady_state(P: np.ndarray) -> np.ndarray:
    """Unique invariant distribution of a unichain stochastic matrix.

    Solves the balance equations with the last one replaced by
    normalization (any balance row is redundant: they sum to zero), via a
    dense LU factorization with row pivoting. Raises NotUnichain if the
    system is singular or the residual check fails.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if P.shape != (n, n):
        raise DimensionMismatch(f"expected square matrix, got {P.shape}")
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as e:
        raise NotUnichain(f"singular balance system: {e}") from e
    if np.any(pi < -1e-9):
        raise NotUnichain("invariant solve produced negative probabilities")
    pi = np.where(pi < 0, 0.0, pi)
    pi = pi / pi.sum()
    residual = float(np.max(np.abs(pi @ P - pi)))
    if residual > STEADY_STATE_TOL:
        raise NotUnichain(f"balance residual {residual:g} exceeds {STEADY_STATE_TOL:g}")
    return pi


def occupation_measure(player: PlayerModel, policy: StationaryPolicy) -> OccupationMeasure:
    """z(y, a) = steady-state(y) * policy(a | y), flat pair order."""
    pi = steady_state(induced_transition(player, policy))
    z = np.empty(player.n_pairs)
    for x in range(player.n_states):
        lo = player.pair_base[x]
        z[lo : lo + player.n_actions[x]] = pi[x] * policy.dist_by_state[x]
    return OccupationMeasure(player.player_id, z)


def policy_from_occupation(player: PlayerModel, z: OccupationMeasure) -> StationaryPolicy:
    """Row-normalize an occupation measure back into a stationary policy.

    States with total mass below 1e-12 receive the uniform distribution
    (the quotient is undefined there); those states are recorded on the
    returned policy's ``uniform_fill_states``.
    """
    if z.owner != player.player_id:
        raise DimensionMismatch(f"measure owner {z.owner} != player {player.player_id}")
    dists = []
    filled = []
    for x in range(player.n_states):
        lo = player.pair_base[x]
        row = z.z[lo : lo + player.n_actions[x]]
        mass = float(row.sum())
        if mass > ZERO_MASS_TOL:
            dists.append(row / mass)
        else:
            dists.append(np.full(player.n_actions[x], 1.0 / player.n_actions[x]))
            filled.append(x)
    return StationaryPolicy(player.player_id, dists, tuple(filled))


def replace_coordinate(u: MultiPolicy, i: int, v_i: StationaryPolicy) -> MultiPolicy:
    """New multi-policy equal to u except player i plays v_i."""
    if v_i.owner != i:
        raise DimensionMismatch(f"replacement policy owner {v_i.owner} != {i}")
    policies = list(u.policies)
    policies[i] = v_i
    return MultiPolicy(policies)


def marginal_cost(model: GameModel, i: int, j: int, u: MultiPolicy) -> MarginalCostTable:
    """Average the coupled cost (i, j) over opponents' stationary
    state-action laws, leaving player i's pair free.

    Opponents' laws form a product measure, so the contraction is done one
    opponent axis at a time (iterated expectation) instead of enumerating
    the joint opponent space. Separable costs pass through unchanged.
    """
    table = model.cost_table(i, j)
    if table.separable:
        return MarginalCostTable(i, j, table.values.copy())
    weights = {
        l: occupation_measure(model.players[l], u[l]).z
        for l in range(model.n_players)
        if l != i
    }
    out = table.values
    # contract highest axes first so lower axis numbers stay valid
    for l in sorted(weights, reverse=True):
        out = np.tensordot(out, weights[l], axes=([l], [0]))
    return MarginalCostTable(i, j, np.asarray(out, dtype=float))


def long_run_cost(model: GameModel, u: MultiPolicy, i: int, j: int) -> float:
    """Exact long-run average of cost (i, j) under a stationary multi-policy,
    via the occupation-measure identity. Independent of the initial
    distribution."""
    z = occupation_measure(model.players[i], u[i])
    mc = marginal_cost(model, i, j, u)
    return float(z.z @ mc.values)


def long_run_cost_product_chain(model: GameModel, u: MultiPolicy, i: int, j: int) -> float:
    """Cross-check of :func:`long_run_cost` from the explicit product chain.

    Builds the global chain over the product state space (Kronecker product
    of the induced per-player matrices: the chains move independently),
    solves its steady state directly, and averages the cost over global
    states and the product action law. Exponential in N; intended for small
    instances and verification.
    """
    P_glob = np.ones((1, 1))
    for p, pol in zip(model.players, u.policies):
        P_glob = np.kron(P_glob, induced_transition(p, pol))
    pi_glob = steady_state(P_glob)

    table = model.cost_table(i, j)
    n_states = [p.n_states for p in model.players]
    total = 0.0
    for flat, prob in enumerate(pi_glob):
        if prob == 0.0:
            continue
        xs = np.unravel_index(flat, n_states)
        # expected cost over the product of action distributions at xs
        acc = _expect_over_actions(model, table, xs, u)
        total += prob * acc
    return float(total)


def _expect_over_actions(model, table, xs, u) -> float:
    # iterate the action product explicitly; desk-scale only
    import itertools

    players = model.players
    acc = 0.0
    ranges = [range(p.n_actions[x]) for p, x in zip(players, xs)]
    for acts in itertools.product(*ranges):
        w = 1.0
        for l, (p, x, a) in enumerate(zip(players, xs, acts)):
            w *= u[l].dist_by_state[x][a]
        if w == 0.0:
            continue
        if table.separable:
            k = players[table.owner].pair_index(xs[table.owner], acts[table.owner])
            acc += w * table.values[k]
        else:
            idx = tuple(p.pair_index(x, a) for p, x, a in zip(players, xs, acts))
            acc += w * table.values[idx]
    return acc
