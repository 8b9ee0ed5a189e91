"""Instance generators.

Two families: random ergodic games with budgets calibrated to be feasible,
and a synthetic uplink power-control game (interference-coupled throughput
objective, average-power budget). The power-control dynamics are a concrete
stand-in for the application: channel quality follows an action-independent
birth-death chain and the battery drains with the transmit level and
occasionally recharges to full, so each player's transitions depend only on
its own state and action, as the model class requires.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import InvalidParams
from .model import ConstraintSpec, CoupledCostTable, GameModel, PlayerModel
from .response import best_response
from .stationary import MultiPolicy, long_run_cost, random_policy, uniform_multi_policy

TRANSITION_FLOOR = 0.01
BOUND_SAMPLES = 200
BOUND_REROLLS = 20


def random_game(
    n_players: int,
    states_per_player: int,
    actions_per_state: int,
    n_constraints: int,
    seed: int = 0,
) -> GameModel:
    """Random game with strictly positive transition rows (ergodic by
    construction) and i.i.d. uniform [0, 1] costs.

    Each budget is set to the midpoint of the constrained cost's range over
    200 sampled stationary multi-policies, re-rolled up to 20 times until
    every player's best-response LP is feasible against the uniform
    multi-policy; otherwise the instance is flagged "constraints-tight" in
    its metadata.
    """
    if min(n_players, states_per_player, actions_per_state) < 1 or n_constraints < 0:
        raise InvalidParams("sizes must be >= 1 (constraints >= 0)")
    rng = np.random.default_rng(seed)
    players = []
    for i in range(n_players):
        blocks = []
        for _ in range(states_per_player):
            rows = rng.dirichlet(np.ones(states_per_player), size=actions_per_state)
            rows = np.maximum(rows, TRANSITION_FLOOR)
            rows /= rows.sum(axis=1, keepdims=True)
            blocks.append(rows)
        states = tuple(f"s{k}" for k in range(states_per_player))
        actions = tuple(
            tuple(f"a{j}" for j in range(actions_per_state))
            for _ in range(states_per_player)
        )
        init = np.full(states_per_player, 1.0 / states_per_player)
        players.append(PlayerModel(i, states, actions, blocks, init))

    shape = tuple(p.n_pairs for p in players)
    costs = [
        CoupledCostTable(i, j, rng.random(shape))
        for i in range(n_players)
        for j in range(n_constraints + 1)
    ]
    metadata = {"name": f"random-{seed}"}
    game = GameModel(players, costs, [], metadata)
    if n_constraints == 0:
        return game

    uniform = uniform_multi_policy(game)
    tight = True
    for _ in range(BOUND_REROLLS):
        samples = [
            MultiPolicy([random_policy(p, rng) for p in players])
            for _ in range(BOUND_SAMPLES)
        ]
        bounds = []
        for i in range(n_players):
            b_i = np.empty(n_constraints)
            for j in range(1, n_constraints + 1):
                vals = [long_run_cost(game, u, i, j) for u in samples]
                b_i[j - 1] = 0.5 * (min(vals) + max(vals))
            bounds.append(ConstraintSpec(i, b_i))
        game = GameModel(players, costs, bounds, metadata)
        if all(
            best_response(game, i, uniform).status == "optimal"
            for i in range(n_players)
        ):
            tight = False
            break
    if tight:
        game.metadata["constraints_tight"] = True
        game.metadata["description"] = "constraints-tight"
    return game


def _channel_chain(n_channel_states: int) -> np.ndarray:
    """Birth-death channel: up/down 0.3, stay 0.4, reflecting at the ends."""
    H = n_channel_states
    P = np.zeros((H, H))
    for h in range(H):
        up = 0.3 if h + 1 < H else 0.0
        down = 0.3 if h > 0 else 0.0
        if h + 1 < H:
            P[h, h + 1] = up
        if h > 0:
            P[h, h - 1] = down
        P[h, h] = 1.0 - up - down
    return P


def power_control_game(
    n_players: int,
    n_channel_states: int,
    power_levels,
    noise_sigma: float,
    gains,
    battery_states: int,
    recharge_prob: float,
    power_budget: float,
) -> GameModel:
    """Uplink power-control game.

    Local state = (channel quality h, battery level b); the action at (h, b)
    transmits at power_levels[k] for any k <= b (level k drains k battery
    units). The battery refills to full with probability recharge_prob,
    independently of the action, which keeps every stationary policy's chain
    unichain for recharge_prob in (0, 1). The objective is negated
    throughput -log(1 + SINR) coupled through all players' channel states
    and powers; the single budget bounds each player's average transmit
    power by power_budget.

    ``gains``: one entry per player, either a scalar (expanded to the
    per-channel profile scalar * (h+1)/H) or a length-H sequence.
    """
    power_levels = list(power_levels)
    if not power_levels:
        raise InvalidParams("power_levels must be non-empty")
    if any(b <= a for a, b in zip(power_levels, power_levels[1:])):
        raise InvalidParams("power_levels must be strictly increasing")
    if noise_sigma <= 0:
        raise InvalidParams("noise_sigma must be positive")
    if min(n_players, n_channel_states, battery_states) < 1:
        raise InvalidParams("player/state counts must be >= 1")
    if not (0.0 <= recharge_prob <= 1.0):
        raise InvalidParams("recharge_prob must lie in [0, 1]")
    gains = list(gains)
    if len(gains) != n_players:
        raise InvalidParams("one gain entry per player required")
    H, B = n_channel_states, battery_states
    gain_profiles = []
    for g in gains:
        if np.isscalar(g):
            gain_profiles.append(np.array([g * (h + 1) / H for h in range(H)]))
        else:
            arr = np.asarray(g, dtype=float)
            if arr.shape != (H,):
                raise InvalidParams("per-channel gain profile must have length H")
            gain_profiles.append(arr)

    P_ch = _channel_chain(H)
    n_states = H * B
    state_names = tuple(f"h{h}b{b}" for h in range(H) for b in range(B))

    def state_idx(h, b):
        return h * B + b

    players = []
    for i in range(n_players):
        # built per player in isolation: transitions depend only on the
        # player's own (state, action)
        actions = []
        blocks = []
        for h in range(H):
            for b in range(B):
                n_act = min(b, len(power_levels) - 1) + 1
                actions.append(tuple(f"p{k}" for k in range(n_act)))
                block = np.zeros((n_act, n_states))
                for k in range(n_act):
                    for h2 in range(H):
                        p_ch = P_ch[h, h2]
                        if p_ch == 0.0:
                            continue
                        drained = b - k
                        block[k, state_idx(h2, B - 1)] += p_ch * recharge_prob
                        block[k, state_idx(h2, drained)] += p_ch * (1.0 - recharge_prob)
                blocks.append(block)
        init = np.zeros(n_states)
        init[[state_idx(h, B - 1) for h in range(H)]] = 1.0 / H  # start on a full battery
        players.append(PlayerModel(i, state_names, tuple(actions), blocks, init))

    # pair k of player l -> (channel gain at its state, transmit power)
    rx_power = []
    for l, p in enumerate(players):
        vals = np.empty(p.n_pairs)
        for k, (x, a) in enumerate(p.pairs):
            h = x // B
            vals[k] = gain_profiles[l][h] * power_levels[a]
        rx_power.append(vals)

    costs = []
    shape = tuple(p.n_pairs for p in players)
    for i in range(n_players):
        objective = np.empty(shape)
        for idx in itertools.product(*(range(k) for k in shape)):
            interference = sum(rx_power[l][idx[l]] for l in range(n_players) if l != i)
            sinr = rx_power[i][idx[i]] / (noise_sigma + interference)
            objective[idx] = -math.log1p(sinr)
        costs.append(CoupledCostTable(i, 0, objective))
        own_power = np.array(
            [power_levels[a] for _, a in players[i].pairs], dtype=float
        )
        costs.append(CoupledCostTable(i, 1, own_power, separable=True))

    constraints = [
        ConstraintSpec(i, np.array([float(power_budget)])) for i in range(n_players)
    ]
    metadata = {
        "name": f"power-control-{n_players}p-{H}h-{B}b",
        "description": "synthetic uplink power-control instance",
    }
    return GameModel(players, costs, constraints, metadata)
