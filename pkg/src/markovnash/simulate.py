"""Monte Carlo rollout of the decentralized game.

Each player's action sampling reads only its own state and its own RNG
substream, so the decentralized information structure holds by
construction: costs are looked up after the step and never influence the
path. The sampler uses the counter-based Philox generator keyed by
(seed, player index), giving per-player independence and exact
reproducibility; the hot per-step loop runs in the compiled kernel with a
bitwise-identical pure-Python fallback (see :mod:`markovnash.kernels`).
"""

from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import GameModel
from .stationary import MultiPolicy, long_run_cost

N_BATCHES = 20


@dataclass
class RolloutConfig:
    horizon: int
    seed: int = 0
    burn_in: int = 0
    record_trajectory: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not (0 <= self.burn_in < self.horizon):
            raise ValueError("burn_in must lie in [0, horizon)")


@dataclass
class RolloutResult:
    empirical_costs: list[np.ndarray]  # per player: objective then budgets
    state_frequencies: list[np.ndarray]
    pair_paths: list[np.ndarray] | None
    backend: str
    horizon: int
    burn_in: int


@dataclass
class DiscrepancyReport:
    analytic: list[np.ndarray]
    empirical: list[np.ndarray]
    standard_errors: list[np.ndarray] | None
    max_abs_discrepancy: float
    insufficient_sample: bool
    n_batches: int
    horizon: int


def _player_stream(seed: int, player_id: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, player_id], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _sampling_tables(player, policy):
    m = max(player.n_actions)
    pol = np.ones((player.n_states, m))
    for x in range(player.n_states):
        c = np.cumsum(policy.dist_by_state[x])
        c[-1] = 1.0  # exact upper end so the index search always terminates
        pol[x, : player.n_actions[x]] = c
    trans = np.empty((player.n_pairs, player.n_states))
    for k, (x, a) in enumerate(player.pairs):
        c = np.cumsum(player.transitions[x][a])
        c[-1] = 1.0
        trans[k] = c
    return pol, player.pair_base.astype(np.int64), trans


def _resolve_backend(backend: str | None):
    if backend is None:
        return kernels.step_pairs, kernels.backend_name()
    if backend == "python":
        from . import _pathkernel_py

        return _pathkernel_py.step_pairs, "python"
    if backend == "cython":
        from . import _pathkernel  # raises ImportError when not built

        return _pathkernel.step_pairs, "cython"
    raise ValueError(f"unknown backend {backend!r}")


def _pair_cost_series(model: GameModel, paths: list[np.ndarray], i: int, j: int):
    table = model.cost_table(i, j)
    if table.separable:
        return table.values[paths[i]]
    flat = np.ravel_multi_index(tuple(paths), table.values.shape)
    return table.values.ravel()[flat]


def rollout(
    model: GameModel,
    u: MultiPolicy,
    config: RolloutConfig,
    backend: str | None = None,
) -> RolloutResult:
    """Sample one trajectory of every player's chain and average the costs.

    Deterministic given (model, u, config): each player consumes its own
    Philox substream (one draw for the initial state, then one per step for
    the action and one for the next state).
    """
    step_pairs, backend_name = _resolve_backend(backend)
    T = config.horizon
    n = model.n_players
    paths = []
    for i, player in enumerate(model.players):
        gen = _player_stream(config.seed, i)
        pol_cdf, pair_base, trans_cdf = _sampling_tables(player, u[i])
        init_cdf = np.cumsum(player.initial_dist)
        init_cdf[-1] = 1.0
        x0 = bisect_right(init_cdf.tolist(), float(gen.random()))
        u_act = gen.random(T)
        u_trans = gen.random(T)
        out = np.zeros(T, dtype=np.int64)
        step_pairs(pol_cdf, pair_base, trans_cdf, x0, u_act, u_trans, out)
        paths.append(out)

    window = slice(config.burn_in, T)
    empirical = []
    freqs = []
    for i, player in enumerate(model.players):
        costs = np.array(
            [
                float(np.mean(_pair_cost_series(model, paths, i, j)[window]))
                for j in range(model.n_constraints(i) + 1)
            ]
        )
        empirical.append(costs)
        states = np.array([x for x, _ in player.pairs], dtype=np.int64)[paths[i][window]]
        freqs.append(np.bincount(states, minlength=player.n_states) / states.shape[0])
    return RolloutResult(
        empirical_costs=empirical,
        state_frequencies=freqs,
        pair_paths=paths if config.record_trajectory else None,
        backend=backend_name,
        horizon=T,
        burn_in=config.burn_in,
    )


def empirical_vs_analytic(
    model: GameModel,
    u: MultiPolicy,
    config: RolloutConfig,
    backend: str | None = None,
) -> DiscrepancyReport:
    """Rollout, then compare time averages against the exact long-run costs.

    Standard errors come from batch means (20 batches over the averaging
    window); a window too short to batch is flagged as an insufficient
    sample instead of reporting bogus errors.
    """
    inner = RolloutConfig(
        horizon=config.horizon,
        seed=config.seed,
        burn_in=config.burn_in,
        record_trajectory=True,
    )
    result = rollout(model, u, inner, backend=backend)
    paths = result.pair_paths
    window = slice(config.burn_in, config.horizon)
    window_len = config.horizon - config.burn_in
    insufficient = window_len < 2 * N_BATCHES
    analytic = []
    errors = [] if not insufficient else None
    worst = 0.0
    for i in range(model.n_players):
        vals = np.array(
            [long_run_cost(model, u, i, j) for j in range(model.n_constraints(i) + 1)]
        )
        analytic.append(vals)
        worst = max(worst, float(np.max(np.abs(vals - result.empirical_costs[i]))))
        if not insufficient:
            se = np.empty(vals.shape[0])
            for j in range(vals.shape[0]):
                series = _pair_cost_series(model, paths, i, j)[window]
                usable = (window_len // N_BATCHES) * N_BATCHES
                batches = series[:usable].reshape(N_BATCHES, -1).mean(axis=1)
                se[j] = float(np.std(batches, ddof=1) / np.sqrt(N_BATCHES))
            errors.append(se)
    return DiscrepancyReport(
        analytic=analytic,
        empirical=result.empirical_costs,
        standard_errors=errors,
        max_abs_discrepancy=worst,
        insufficient_sample=insufficient,
        n_batches=N_BATCHES,
        horizon=config.horizon,
    )


def write_trajectory_csv(model: GameModel, result: RolloutResult, target) -> None:
    """Dump a recorded trajectory: one `t,player,state,action,cost...` row
    per (step, player), costs in cost-index order for that player."""
    if result.pair_paths is None:
        raise ValueError("rollout was not configured to record the trajectory")
    series = [
        [
            _pair_cost_series(model, result.pair_paths, i, j)
            for j in range(model.n_constraints(i) + 1)
        ]
        for i in range(model.n_players)
    ]

    def dump(f):
        writer = csv.writer(f, lineterminator="\n")
        for t in range(result.horizon):
            for i, player in enumerate(model.players):
                x, a = player.pairs[int(result.pair_paths[i][t])]
                writer.writerow(
                    [t, i, player.states[x], player.actions_by_state[x][a]]
                    + [repr(float(s[t])) for s in series[i]]
                )

    if hasattr(target, "write"):
        dump(target)
    else:
        with open(target, "w", encoding="utf-8", newline="") as f:
            dump(f)
