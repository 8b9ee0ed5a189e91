import numpy as np
import pytest

from markovnash.errors import InvalidParams
from markovnash.model import check_ergodicity, load_game, save_game, validate
from markovnash.response import best_response, best_response_gap
from markovnash.scenario import power_control_game, random_game
from markovnash.stationary import uniform_multi_policy
from markovnash.equilibrium import SolverConfig, solve


def test_random_game_validates_and_is_ergodic():
    for seed in (0, 1, 7):
        game = random_game(2, 3, 2, 1, seed=seed)
        assert validate(game).is_clean
        for p in game.players:
            assert check_ergodicity(p).status == "PASS"


def test_random_game_deterministic_per_seed():
    a = random_game(2, 2, 2, 1, seed=5)
    b = random_game(2, 2, 2, 1, seed=5)
    assert a.equals(b)
    c = random_game(2, 2, 2, 1, seed=6)
    assert not a.equals(c)


def test_random_game_unconstrained_always_feasible():
    game = random_game(2, 2, 2, 0, seed=3)
    u = uniform_multi_policy(game)
    for i in range(2):
        assert best_response(game, i, u).status == "optimal"


def test_random_game_bounds_feasible_at_uniform():
    for seed in range(6):
        game = random_game(2, 2, 2, 1, seed=seed)
        if game.metadata.get("constraints_tight"):
            continue
        u = uniform_multi_policy(game)
        for i in range(2):
            assert best_response(game, i, u).status == "optimal"


def test_random_game_round_trips_through_json(tmp_path):
    game = random_game(2, 2, 2, 1, seed=9)
    path = tmp_path / "g.json"
    save_game(game, path)
    assert load_game(path).equals(game)


def power_game(**overrides):
    params = dict(
        n_players=2,
        n_channel_states=2,
        power_levels=[0.0, 1.0, 2.0],
        noise_sigma=1.0,
        gains=[1.0, 1.5],
        battery_states=3,
        recharge_prob=0.4,
        power_budget=1.0,
    )
    params.update(overrides)
    return power_control_game(**params)


def test_power_control_validates_and_is_ergodic():
    game = power_game()
    assert validate(game).is_clean
    for p in game.players:
        assert check_ergodicity(p).status == "PASS"


def test_power_control_actions_limited_by_battery():
    game = power_game()
    p = game.players[0]
    B = 3
    for x, name in enumerate(p.states):
        b = int(name.split("b")[1])
        assert p.n_actions[x] == min(b, 2) + 1


def test_power_control_transitions_action_local():
    # the two players' transition tensors are identical because they are
    # built from own-state/own-action data only
    game = power_game()
    p0, p1 = game.players
    for b0, b1 in zip(p0.transitions, p1.transitions):
        assert np.array_equal(b0, b1)


def test_power_control_constraint_is_own_power():
    game = power_game()
    for i in range(2):
        t = game.cost_table(i, 1)
        assert t.separable
        p = game.players[i]
        expect = np.array([[0.0, 1.0, 2.0][a] for _, a in p.pairs])
        assert np.array_equal(t.values, expect)


def test_power_control_zero_gains_constant_objective():
    game = power_game(gains=[0.0, 0.0])
    for i in range(2):
        assert np.all(game.cost_table(i, 0).values == 0.0)
    u = uniform_multi_policy(game)
    for i in range(2):
        assert best_response_gap(game, i, u).gap <= 1e-10


def test_power_control_single_player_matches_grid_oracle():
    # decoupled single-player instance certified against the direct grid
    from helpers import grid_search_cmdp_minimum

    game = power_game(
        n_players=1,
        gains=[1.0],
        n_channel_states=1,
        battery_states=2,
        power_levels=[0.0, 1.0],
        power_budget=0.4,
    )
    out = best_response(game, 0, uniform_multi_policy(game))
    assert out.status == "optimal"
    grid_min, n_feas = grid_search_cmdp_minimum(game, step=0.05)
    assert n_feas > 0
    assert out.value <= grid_min + 1e-8
    assert grid_min - out.value <= 0.1


def test_power_control_slack_budget_matches_unconstrained():
    tight = power_game(power_budget=10.0)  # never binds: max power is 2
    loose_result = solve(tight, SolverConfig(seed=1))
    unconstrained = power_game(power_budget=10.0)
    # strip the budget entirely: drop constraints and the budget tables
    from markovnash.model import GameModel

    stripped = GameModel(
        unconstrained.players,
        [t for t in unconstrained.costs if t.cost_index == 0],
        [],
        {},
    )
    free_result = solve(stripped, SolverConfig(seed=1))
    assert loose_result.status == "converged"
    assert free_result.status == "converged"
    for i in range(2):
        assert loose_result.costs[i][0] == pytest.approx(
            free_result.costs[i][0], abs=1e-6
        )


def test_power_control_invalid_params():
    with pytest.raises(InvalidParams):
        power_game(power_levels=[])
    with pytest.raises(InvalidParams):
        power_game(noise_sigma=0.0)
    with pytest.raises(InvalidParams):
        power_game(power_levels=[1.0, 0.5])
    with pytest.raises(InvalidParams):
        power_game(gains=[1.0])
    with pytest.raises(InvalidParams):
        power_game(recharge_prob=1.5)
