import io

import numpy as np
import pytest

from helpers import (
    build_game,
    chain_90_10_player,
    dense_cost,
    player_from_blocks,
    single_state_player,
    two_player_coupled_game,
)
from markovnash import kernels
from markovnash.model import CoupledCostTable, GameModel
from markovnash.simulate import (
    DiscrepancyReport,
    RolloutConfig,
    empirical_vs_analytic,
    rollout,
    write_trajectory_csv,
)
from markovnash.stationary import (
    MultiPolicy,
    StationaryPolicy,
    long_run_cost,
    uniform_multi_policy,
)


def policy(pid, rows):
    return StationaryPolicy(pid, [np.asarray(r, float) for r in rows])


def test_degenerate_chain_exact_average():
    p = single_state_player(0, n_actions=1)
    game = build_game([p], [dense_cost([p], 0, 0, lambda idx: 2.5)])
    u = MultiPolicy([policy(0, [[1.0]])])
    for T in (1, 7, 100):
        result = rollout(game, u, RolloutConfig(horizon=T, seed=1))
        assert result.empirical_costs[0][0] == 2.5


def test_visitation_matches_steady_state():
    p = chain_90_10_player()
    game = build_game([p], [dense_cost([p], 0, 0, lambda idx: float(idx[0]))])
    u = MultiPolicy([policy(0, [[1.0, 0.0], [1.0, 0.0]])])  # the 0.9/0.1 chain
    result = rollout(game, u, RolloutConfig(horizon=10**6, seed=5))
    assert abs(result.state_frequencies[0][0] - 2.0 / 3.0) <= 0.005


def test_seed_determinism():
    game = two_player_coupled_game()
    u = uniform_multi_policy(game)
    config = RolloutConfig(horizon=2000, seed=42, record_trajectory=True)
    r1 = rollout(game, u, config)
    r2 = rollout(game, u, config)
    for a, b in zip(r1.pair_paths, r2.pair_paths):
        assert np.array_equal(a, b)
    for a, b in zip(r1.empirical_costs, r2.empirical_costs):
        assert np.array_equal(a, b)


def test_backends_agree_bitwise():
    game = two_player_coupled_game()
    u = uniform_multi_policy(game)
    config = RolloutConfig(horizon=3000, seed=9, record_trajectory=True)
    r_py = rollout(game, u, config, backend="python")
    assert r_py.backend == "python"
    if kernels.backend_name() != "cython":
        pytest.skip("compiled kernel not built")
    r_cy = rollout(game, u, config, backend="cython")
    for a, b in zip(r_cy.pair_paths, r_py.pair_paths):
        assert np.array_equal(a, b)
    for a, b in zip(r_cy.empirical_costs, r_py.empirical_costs):
        assert np.array_equal(a, b)


def test_paths_ignore_opponent_cost_tables():
    # decentralization: costs are recorded after sampling, so permuting an
    # opponent's cost table must leave the sampled trajectory untouched
    game = two_player_coupled_game()
    u = uniform_multi_policy(game)
    config = RolloutConfig(horizon=500, seed=3, record_trajectory=True)
    r1 = rollout(game, u, config)
    permuted_costs = []
    for t in game.costs:
        v = t.values[::-1].copy() if t.owner == 1 else t.values
        permuted_costs.append(CoupledCostTable(t.owner, t.cost_index, v, t.separable))
    game2 = GameModel(game.players, permuted_costs, game.constraints, {})
    r2 = rollout(game2, u, config)
    for a, b in zip(r1.pair_paths, r2.pair_paths):
        assert np.array_equal(a, b)


def test_different_initial_distributions_agree_statistically():
    game = two_player_coupled_game()
    u = uniform_multi_policy(game)
    config = RolloutConfig(horizon=10**5, seed=17)
    rep1 = empirical_vs_analytic(game, u, config)
    players2 = [
        player_from_blocks(p.player_id, p.transitions, np.eye(p.n_states)[-1])
        for p in game.players
    ]
    game2 = GameModel(players2, game.costs, game.constraints, {})
    rep2 = empirical_vs_analytic(game2, u, config)
    for i in range(2):
        se = np.maximum(rep1.standard_errors[i], rep2.standard_errors[i]) + 1e-12
        assert np.all(np.abs(rep1.empirical[i] - rep2.empirical[i]) <= 6 * se)
    # the analytic values are exactly beta-independent
    for a, b in zip(rep1.analytic, rep2.analytic):
        assert np.allclose(a, b, atol=1e-12)


def test_empirical_within_three_standard_errors():
    game = two_player_coupled_game()
    u = uniform_multi_policy(game)
    report = empirical_vs_analytic(game, u, RolloutConfig(horizon=10**5, seed=11))
    assert not report.insufficient_sample
    for i in range(2):
        err = np.abs(report.empirical[i] - report.analytic[i])
        # constants are exact; stochastic entries within 3 estimated SEs
        assert np.all(err <= 3 * report.standard_errors[i] + 1e-12)


def test_constant_costs_zero_discrepancy():
    p = chain_90_10_player()
    game = build_game([p], [dense_cost([p], 0, 0, lambda idx: 1.75)])
    u = MultiPolicy([policy(0, [[0.4, 0.6], [0.5, 0.5]])])
    report = empirical_vs_analytic(game, u, RolloutConfig(horizon=5000, seed=2))
    assert report.max_abs_discrepancy <= 1e-12


def test_single_step_flags_insufficient_sample():
    game = two_player_coupled_game()
    u = uniform_multi_policy(game)
    report = empirical_vs_analytic(game, u, RolloutConfig(horizon=1, seed=0))
    assert report.insufficient_sample
    assert report.standard_errors is None


def test_longer_horizons_tighten_discrepancy():
    game = two_player_coupled_game()
    u = uniform_multi_policy(game)
    wins = 0
    for seed in range(5):
        short = empirical_vs_analytic(game, u, RolloutConfig(horizon=10**4, seed=seed))
        long = empirical_vs_analytic(game, u, RolloutConfig(horizon=10**6, seed=seed))
        if long.max_abs_discrepancy <= short.max_abs_discrepancy:
            wins += 1
    assert wins >= 4


def test_trajectory_csv_format():
    game = two_player_coupled_game()
    u = uniform_multi_policy(game)
    result = rollout(game, u, RolloutConfig(horizon=4, seed=1, record_trajectory=True))
    buf = io.StringIO()
    write_trajectory_csv(game, result, buf)
    lines = buf.getvalue().strip().split("\n")
    assert len(lines) == 4 * 2
    first = lines[0].split(",")
    assert first[0] == "0" and first[1] == "0"
    assert first[2] in game.players[0].states
    # player 0 has 2 cost tables: t, player, state, action, cost0, cost1
    assert len(first) == 6
    for row in lines:
        t, i = row.split(",")[:2]
        assert 0 <= int(t) < 4 and int(i) in (0, 1)


def test_rollout_config_validation():
    with pytest.raises(ValueError):
        RolloutConfig(horizon=0)
    with pytest.raises(ValueError):
        RolloutConfig(horizon=10, burn_in=10)


def test_burn_in_drops_prefix():
    game = two_player_coupled_game()
    u = uniform_multi_policy(game)
    r_full = rollout(game, u, RolloutConfig(horizon=1000, seed=8, record_trajectory=True))
    r_burn = rollout(
        game, u, RolloutConfig(horizon=1000, seed=8, burn_in=500, record_trajectory=True)
    )
    # identical paths, different averaging windows
    for a, b in zip(r_full.pair_paths, r_burn.pair_paths):
        assert np.array_equal(a, b)
    series = r_full.pair_paths[0][500:]
    states = np.array([x for x, _ in game.players[0].pairs])[series]
    freq = np.bincount(states, minlength=2) / 500
    assert np.allclose(freq, r_burn.state_frequencies[0])
