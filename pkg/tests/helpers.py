"""Small instance builders and brute-force oracles shared across the suite."""

import itertools
import math

import numpy as np

from markovnash.model import (
    ConstraintSpec,
    CoupledCostTable,
    GameModel,
    PlayerModel,
)
from markovnash.stationary import steady_state


def player_from_blocks(pid, blocks, init=None):
    """Player with auto-named states/actions from per-state transition blocks.

    ``blocks[x]`` is an (n_actions(x), n_states) row-stochastic array.
    """
    n = len(blocks)
    states = tuple(f"s{k}" for k in range(n))
    actions = tuple(
        tuple(f"a{j}" for j in range(np.asarray(b).shape[0])) for b in blocks
    )
    if init is None:
        init = np.full(n, 1.0 / n)
    return PlayerModel(pid, states, actions, [np.asarray(b, float) for b in blocks], init)


def chain_90_10_player(pid=0):
    """2-state player; each state has a 'stay-ish' and a 'move-ish' action.

    Under the deterministic policy (a0, a0) the induced chain is
    [[0.9, 0.1], [0.2, 0.8]] with invariant distribution (2/3, 1/3)
    (derived from the balance equation pi0 * 0.1 = pi1 * 0.2).
    """
    return player_from_blocks(
        pid,
        [
            np.array([[0.9, 0.1], [0.2, 0.8]]),
            np.array([[0.2, 0.8], [0.7, 0.3]]),
        ],
    )


def single_state_player(pid=0, n_actions=2):
    return player_from_blocks(pid, [np.ones((n_actions, 1))])


def dense_cost(players, owner, index, fn):
    """Dense coupled table; fn maps a tuple of flat pair indices to a value."""
    shape = tuple(p.n_pairs for p in players)
    values = np.empty(shape)
    it = np.nditer(values, flags=["multi_index"], op_flags=["writeonly"])
    for v in it:
        v[...] = fn(it.multi_index)
    return CoupledCostTable(owner, index, values, separable=False)


def separable_cost(players, owner, index, local_values):
    return CoupledCostTable(owner, index, np.asarray(local_values, float), separable=True)


def build_game(players, costs, bounds_by_owner=None, name="test"):
    constraints = []
    if bounds_by_owner:
        for owner, bounds in bounds_by_owner.items():
            constraints.append(ConstraintSpec(owner, np.asarray(bounds, float)))
    return GameModel(list(players), list(costs), constraints, {"name": name})


def two_player_coupled_game():
    """2 players (2-state chains), dense objectives, one constraint each."""
    p0 = chain_90_10_player(0)
    p1 = player_from_blocks(
        1,
        [
            np.array([[0.5, 0.5], [0.1, 0.9]]),
            np.array([[0.6, 0.4], [0.3, 0.7]]),
        ],
    )
    players = [p0, p1]
    c00 = dense_cost(players, 0, 0, lambda idx: 0.1 * idx[0] + 0.3 * idx[1] + 0.05 * idx[0] * idx[1])
    c01 = dense_cost(players, 0, 1, lambda idx: 1.0 if idx[0] % 2 == 0 else 0.0)
    c10 = dense_cost(players, 1, 0, lambda idx: 0.2 * idx[1] + 0.1 * idx[0])
    c11 = dense_cost(players, 1, 1, lambda idx: 0.5 * (idx[1] % 2))
    return build_game(
        players,
        [c00, c01, c10, c11],
        bounds_by_owner={0: [0.8], 1: [0.4]},
        name="coupled-2p",
    )


# --- brute-force oracles (independent of the LP path) -----------------------


def single_player_random_game(rng, n_states, n_actions, n_constraints, floor=0.1):
    """Single-player instance with strictly positive transition rows (every
    induced chain is irreducible) and uniform [0,1] costs."""
    blocks = []
    for _ in range(n_states):
        B = rng.random((n_actions, n_states)) + floor
        blocks.append(B / B.sum(axis=1, keepdims=True))
    p = player_from_blocks(0, blocks)
    costs = [
        dense_cost([p], 0, j, lambda idx, r=rng.random(p.n_pairs): r[idx[0]])
        for j in range(n_constraints + 1)
    ]
    bounds = None
    if n_constraints:
        bounds = {0: list(rng.random(n_constraints) * 0.4 + 0.3)}
    return build_game([p], costs, bounds)


def deterministic_policy_minimum(game):
    """Exact unconstrained optimum of a single-player game: enumerate all
    deterministic policies, evaluating each via its steady state directly."""
    p = game.players[0]
    table = game.cost_table(0, 0).values
    best = math.inf
    for choice in itertools.product(*(range(m) for m in p.n_actions)):
        P = np.vstack([p.transitions[x][a] for x, a in enumerate(choice)])
        pi = steady_state(P)
        cost = sum(
            pi[x] * table[p.pair_index(x, choice[x])] for x in range(p.n_states)
        )
        best = min(best, cost)
    return best


def simplex_grid(m, step=0.05):
    """All probability vectors over m atoms with coordinates on a step grid."""
    ticks = round(1.0 / step)
    for combo in itertools.combinations_with_replacement(range(m), ticks):
        counts = np.bincount(combo, minlength=m)
        yield counts * step


def grid_search_cmdp_minimum(game, step=0.05, feas_eps=1e-12):
    """Constrained minimum of the objective over the per-state policy grid.

    Direct batched evaluation (stacked steady-state solves), independent of
    the LP path. Single-player games with equal action counts per state and
    strictly positive rows only. Returns (min_value, n_feasible_points);
    min is inf when no grid point is feasible.
    """
    p = game.players[0]
    n = p.n_states
    counts = set(p.n_actions)
    if len(counts) > 1:
        return _grid_search_ragged(game, step, feas_eps)
    m = counts.pop()
    pts = np.array(list(simplex_grid(m, step)))
    combos = list(itertools.product(range(len(pts)), repeat=n))
    U = np.array([[pts[c[x]] for x in range(n)] for c in combos])  # (G, n, m)
    T = np.stack([np.asarray(p.transitions[x]) for x in range(n)])  # (n, m, n)
    P = np.einsum("gxm,xmn->gxn", U, T)
    A = np.transpose(P, (0, 2, 1)) - np.eye(n)
    A[:, -1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    Z = (pi[:, :, None] * U).reshape(len(combos), -1)  # flat pair order
    n_tables = game.n_constraints(0) + 1
    tables = np.stack([game.cost_table(0, j).values for j in range(n_tables)])
    vals = Z @ tables.T
    feas = np.ones(len(combos), dtype=bool)
    bounds = game.bounds(0)
    for j in range(1, n_tables):
        feas &= vals[:, j] <= bounds[j - 1] + feas_eps
    if not feas.any():
        return math.inf, 0
    return float(vals[feas, 0].min()), int(feas.sum())


def _grid_search_ragged(game, step, feas_eps):
    """Point-by-point grid search for unequal per-state action counts."""
    p = game.players[0]
    bounds = game.bounds(0)
    n_tables = game.n_constraints(0) + 1
    tables = [game.cost_table(0, j).values for j in range(n_tables)]
    grids = [list(simplex_grid(m, step)) for m in p.n_actions]
    best = math.inf
    n_feasible = 0
    for rows in itertools.product(*grids):
        P = np.vstack([rows[x] @ p.transitions[x] for x in range(p.n_states)])
        pi = steady_state(P)
        z = np.concatenate([pi[x] * rows[x] for x in range(p.n_states)])
        if any(
            tables[j] @ z > bounds[j - 1] + feas_eps for j in range(1, n_tables)
        ):
            continue
        n_feasible += 1
        best = min(best, float(tables[0] @ z))
    return best, n_feasible
