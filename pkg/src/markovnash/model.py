"""Game definition and validation.

A game couples N players only through costs: each player controls its own
finite Markov chain (transitions depend on that player's state and action
alone), while every cost table is indexed by the global state-action tuple.
This module holds the data model, the invariant checker, the
all-deterministic-policies ergodicity check, and the JSON file format.

Indexing conventions used everywhere downstream:
  * players, states, and actions are 0-based integer indices, assigned in
    declaration order;
  * a player's state-action pairs are flattened state-major / action-minor
    ("pair index"); ``PlayerModel.pair_base[x]`` is the flat index of
    (x, first action).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from .errors import ParseError, SchemaError, SizeLimitExceeded

# Probability rows must sum to 1 within this tolerance; rows inside the
# tolerance are renormalized exactly on load.
PROB_TOL = 1e-12

DEFAULT_POLICY_ENUM_CAP = 10**6
DEFAULT_POLICY_SAMPLES = 10**4


@dataclass
class PlayerModel:
    """One player's finite controlled Markov chain.

    ``transitions[x]`` is an (n_actions(x), n_states) row-stochastic array;
    ``initial_dist`` is the initial state distribution. Treat instances as
    immutable once validated; all operations downstream are pure functions.
    """

    player_id: int
    states: tuple[str, ...]
    actions_by_state: tuple[tuple[str, ...], ...]
    transitions: list[np.ndarray]
    initial_dist: np.ndarray

    def __post_init__(self):
        self.states = tuple(self.states)
        self.actions_by_state = tuple(tuple(a) for a in self.actions_by_state)
        self.transitions = [np.asarray(t, dtype=float) for t in self.transitions]
        self.initial_dist = np.asarray(self.initial_dist, dtype=float)
        self.n_states = len(self.states)
        self.n_actions = tuple(len(a) for a in self.actions_by_state)
        base = np.zeros(self.n_states, dtype=np.int64)
        if self.n_states:
            base[1:] = np.cumsum(self.n_actions[:-1])
        self.pair_base = base
        self.n_pairs = int(sum(self.n_actions))
        # flat pair index -> (state, action slot)
        self.pairs = tuple(
            (x, a) for x in range(self.n_states) for a in range(self.n_actions[x])
        )

    def pair_index(self, x: int, a: int) -> int:
        return int(self.pair_base[x]) + a

    def state_index(self, name: str) -> int:
        return self.states.index(name)

    def action_index(self, x: int, name: str) -> int:
        return self.actions_by_state[x].index(name)

    def pair_names(self) -> list[str]:
        """Flat pair labels "state:action" in canonical order."""
        return [
            f"{self.states[x]}:{self.actions_by_state[x][a]}" for x, a in self.pairs
        ]


@dataclass
class CoupledCostTable:
    """One immediate cost c for one (owner, index) slot.

    Dense form: ``values`` has shape (K_0, ..., K_{N-1}) over all players'
    flat pair indices. Separable form (value depends on the owner's pair
    only): shape (K_owner,) with ``separable=True``.
    """

    owner: int
    cost_index: int
    values: np.ndarray
    separable: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)


@dataclass
class ConstraintSpec:
    """Per-player budget vector; ``bounds[j-1]`` bounds cost index j."""

    owner: int
    bounds: np.ndarray

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=float)


@dataclass
class GameModel:
    """A full game: players, coupled cost tables, and constraint budgets."""

    players: list[PlayerModel]
    costs: list[CoupledCostTable]
    constraints: list[ConstraintSpec]
    metadata: dict = field(default_factory=dict)

    @property
    def n_players(self) -> int:
        return len(self.players)

    def n_constraints(self, i: int) -> int:
        """Number of constrained cost indices B_i for player i."""
        for spec in self.constraints:
            if spec.owner == i:
                return len(spec.bounds)
        return 0

    def bounds(self, i: int) -> np.ndarray:
        for spec in self.constraints:
            if spec.owner == i:
                return spec.bounds
        return np.zeros(0)

    def cost_table(self, i: int, j: int) -> CoupledCostTable:
        for table in self.costs:
            if table.owner == i and table.cost_index == j:
                return table
        raise KeyError(f"no cost table for player {i}, index {j}")

    def equals(self, other: "GameModel") -> bool:
        """Exact (bitwise) structural and numeric equality."""
        if self.n_players != other.n_players:
            return False
        for p, q in zip(self.players, other.players):
            if p.states != q.states or p.actions_by_state != q.actions_by_state:
                return False
            if not np.array_equal(p.initial_dist, q.initial_dist):
                return False
            if any(
                not np.array_equal(a, b) for a, b in zip(p.transitions, q.transitions)
            ):
                return False
        if len(self.costs) != len(other.costs):
            return False
        for c, d in zip(self.costs, other.costs):
            if (c.owner, c.cost_index, c.separable) != (d.owner, d.cost_index, d.separable):
                return False
            if not np.array_equal(c.values, d.values):
                return False
        if len(self.constraints) != len(other.constraints):
            return False
        for c, d in zip(self.constraints, other.constraints):
            if c.owner != d.owner or not np.array_equal(c.bounds, d.bounds):
                return False
        return True


@dataclass
class Violation:
    where: str
    message: str

    def __str__(self):
        return f"{self.where}: {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def is_clean(self) -> bool:
        return not self.violations

    def add(self, where: str, message: str):
        self.violations.append(Violation(where, message))

    def __str__(self):
        if self.is_clean:
            return "ok"
        return "\n".join(str(v) for v in self.violations)


def validate(model: GameModel) -> ValidationReport:
    """Check every model invariant; violations are data, not exceptions.

    Pure and idempotent: repeated calls on the same model return the same
    report and never mutate the model.
    """
    report = ValidationReport()
    for i, p in enumerate(model.players):
        loc = f"player {i}"
        if p.player_id != i:
            report.add(loc, f"player_id {p.player_id} does not match position {i}")
        if p.n_states == 0:
            report.add(loc, "no states")
            continue
        if len(p.actions_by_state) != p.n_states:
            report.add(loc, "actions_by_state length does not match state count")
            continue
        for x in range(p.n_states):
            if p.n_actions[x] == 0:
                report.add(f"{loc} state '{p.states[x]}'", "no actions")
        if len(p.transitions) != p.n_states:
            report.add(loc, "transitions length does not match state count")
            continue
        for x in range(p.n_states):
            t = p.transitions[x]
            if t.shape != (p.n_actions[x], p.n_states):
                report.add(
                    f"{loc} state '{p.states[x]}'",
                    f"transition block shape {t.shape} != "
                    f"({p.n_actions[x]}, {p.n_states})",
                )
                continue
            for a in range(p.n_actions[x]):
                row = t[a]
                where = (
                    f"{loc} state '{p.states[x]}' action "
                    f"'{p.actions_by_state[x][a]}'"
                )
                if np.any(row < 0):
                    report.add(where, "negative transition probability")
                s = float(row.sum())
                if abs(s - 1.0) > PROB_TOL:
                    report.add(where, f"row sums to {s!r}, not 1")
        if p.initial_dist.shape != (p.n_states,):
            report.add(loc, "initial distribution has wrong length")
        else:
            if np.any(p.initial_dist < 0):
                report.add(loc, "negative initial probability")
            s = float(p.initial_dist.sum())
            if abs(s - 1.0) > PROB_TOL:
                report.add(loc, f"initial distribution sums to {s!r}, not 1")

    shape = tuple(p.n_pairs for p in model.players)
    seen = {}
    for t in model.costs:
        loc = f"cost (player {t.owner}, index {t.cost_index})"
        if not (0 <= t.owner < model.n_players):
            report.add(loc, "owner out of range")
            continue
        if t.cost_index < 0:
            report.add(loc, "negative cost index")
            continue
        key = (t.owner, t.cost_index)
        if key in seen:
            report.add(loc, "duplicate cost table")
            continue
        seen[key] = t
        want = (model.players[t.owner].n_pairs,) if t.separable else shape
        if t.values.shape != want:
            report.add(loc, f"values shape {t.values.shape} != {want}")
            continue
        if not np.all(np.isfinite(t.values)):
            idx = np.argwhere(~np.isfinite(t.values))[0]
            report.add(loc, f"missing or non-finite entry at {_tuple_name(model, t, idx)}")

    for spec in model.constraints:
        if not (0 <= spec.owner < model.n_players):
            report.add(f"constraints (player {spec.owner})", "owner out of range")
    owners = [s.owner for s in model.constraints]
    for o in set(owners):
        if owners.count(o) > 1:
            report.add(f"constraints (player {o})", "duplicate constraint spec")

    for i in range(model.n_players):
        b = model.n_constraints(i)
        for j in range(b + 1):
            if (i, j) not in seen:
                report.add(
                    f"cost (player {i}, index {j})",
                    "no cost table for this (player, index)",
                )
    for (i, j) in seen:
        if j > model.n_constraints(i):
            report.add(
                f"cost (player {i}, index {j})",
                f"cost index exceeds bound count {model.n_constraints(i)}",
            )
    return report


def _tuple_name(model: GameModel, table: CoupledCostTable, idx) -> str:
    if table.separable:
        p = model.players[table.owner]
        x, a = p.pairs[int(idx[0])]
        return f"{p.states[x]}:{p.actions_by_state[x][a]}"
    parts = []
    for l, k in enumerate(idx):
        p = model.players[l]
        x, a = p.pairs[int(k)]
        parts.append(f"{p.states[x]}:{p.actions_by_state[x][a]}")
    return "|".join(parts)


# ---------------------------------------------------------------------------
# Ergodicity (all deterministic stationary policies induce a unichain)
# ---------------------------------------------------------------------------


@dataclass
class ErgodicityReport:
    player_id: int
    status: str  # "PASS" | "FAIL" | "PASS_SAMPLED"
    n_policies_checked: int
    witness_policy: tuple[int, ...] | None = None
    closed_classes: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    @property
    def passed(self) -> bool:
        return self.status in ("PASS", "PASS_SAMPLED")


def _recurrent_classes(adj: np.ndarray) -> list[tuple[int, ...]]:
    """Closed communicating classes of a directed reachability graph."""
    n = adj.shape[0]
    reach = adj.astype(bool) | np.eye(n, dtype=bool)
    while True:
        nxt = (reach.astype(np.uint8) @ reach.astype(np.uint8)) > 0
        if np.array_equal(nxt, reach):
            break
        reach = nxt
    # state s is recurrent iff everything reachable from s reaches s back
    recurrent = [s for s in range(n) if np.all(~reach[s] | reach[:, s])]
    classes = []
    assigned = set()
    for s in recurrent:
        if s in assigned:
            continue
        cls = tuple(t for t in recurrent if reach[s, t] and reach[t, s])
        assigned.update(cls)
        classes.append(cls)
    return classes


def _policy_closed_classes(player: PlayerModel, choice) -> list[tuple[int, ...]]:
    adj = np.zeros((player.n_states, player.n_states), dtype=bool)
    for x, a in enumerate(choice):
        adj[x] = player.transitions[x][a] > 0
    return _recurrent_classes(adj)


def check_ergodicity(
    player: PlayerModel, cap: int = DEFAULT_POLICY_ENUM_CAP
) -> ErgodicityReport:
    """PASS iff every deterministic stationary policy induces exactly one
    recurrent class; a closed class under a randomized policy is closed under
    some deterministic selection from its support, so this finite check
    covers all stationary policies.

    Raises SizeLimitExceeded when the deterministic-policy count exceeds
    ``cap``; use :func:`check_ergodicity_sampled` then.
    """
    count = math.prod(player.n_actions)
    if count > cap:
        raise SizeLimitExceeded(
            f"player {player.player_id}: {count} deterministic policies "
            f"exceed cap {cap}"
        )
    checked = 0
    for choice in itertools.product(*(range(m) for m in player.n_actions)):
        checked += 1
        classes = _policy_closed_classes(player, choice)
        if len(classes) > 1:
            return ErgodicityReport(
                player.player_id,
                "FAIL",
                checked,
                witness_policy=choice,
                closed_classes=(classes[0], classes[1]),
            )
    return ErgodicityReport(player.player_id, "PASS", checked)


def check_ergodicity_sampled(
    player: PlayerModel, n_samples: int = DEFAULT_POLICY_SAMPLES, seed: int = 0
) -> ErgodicityReport:
    """Sampled fallback for large action products: PASS_SAMPLED or FAIL."""
    rng = np.random.default_rng(seed)
    for k in range(n_samples):
        choice = tuple(int(rng.integers(m)) for m in player.n_actions)
        classes = _policy_closed_classes(player, choice)
        if len(classes) > 1:
            return ErgodicityReport(
                player.player_id,
                "FAIL",
                k + 1,
                witness_policy=choice,
                closed_classes=(classes[0], classes[1]),
            )
    return ErgodicityReport(player.player_id, "PASS_SAMPLED", n_samples)


# ---------------------------------------------------------------------------
# JSON file format
# ---------------------------------------------------------------------------


def _require(cond: bool, msg: str):
    if not cond:
        raise SchemaError(msg)


def _check_name(name, what: str) -> str:
    _require(isinstance(name, str) and name != "", f"{what}: names must be non-empty strings")
    _require(":" not in name and "|" not in name, f"{what}: name {name!r} may not contain ':' or '|'")
    return name


def _renormalize(row: np.ndarray) -> np.ndarray:
    # Renormalize exactly when inside tolerance so downstream algebra sees
    # exact stochastic rows; leave worse rows alone for validate() to flag.
    s = float(row.sum())
    if s != 1.0 and abs(s - 1.0) <= PROB_TOL and s > 0:
        return row / s
    return row


def _load_player(i: int, obj) -> PlayerModel:
    _require(isinstance(obj, dict), f"players[{i}] must be an object")
    states = obj.get("states")
    _require(isinstance(states, list) and states, f"players[{i}].states must be a non-empty list")
    states = tuple(_check_name(s, f"players[{i}].states") for s in states)
    _require(len(set(states)) == len(states), f"players[{i}].states has duplicates")
    sidx = {s: k for k, s in enumerate(states)}

    actions_obj = obj.get("actions")
    _require(isinstance(actions_obj, dict), f"players[{i}].actions must be an object")
    for s in actions_obj:
        _require(s in sidx, f"players[{i}].actions: unknown state {s!r}")
    actions = []
    for s in states:
        acts = actions_obj.get(s)
        _require(
            isinstance(acts, list) and acts,
            f"players[{i}].actions[{s!r}] must be a non-empty list",
        )
        acts = tuple(_check_name(a, f"players[{i}].actions[{s!r}]") for a in acts)
        _require(len(set(acts)) == len(acts), f"players[{i}].actions[{s!r}] has duplicates")
        actions.append(acts)

    trans_obj = obj.get("transitions")
    _require(isinstance(trans_obj, dict), f"players[{i}].transitions must be an object")
    for s in trans_obj:
        _require(s in sidx, f"players[{i}].transitions: unknown state {s!r}")
    transitions = []
    for x, s in enumerate(states):
        rows = trans_obj.get(s)
        _require(isinstance(rows, dict), f"players[{i}].transitions[{s!r}] must be an object")
        block = np.zeros((len(actions[x]), len(states)))
        for a_name in rows:
            _require(
                a_name in actions[x],
                f"players[{i}].transitions[{s!r}]: unknown action {a_name!r}",
            )
        for a, a_name in enumerate(actions[x]):
            row = rows.get(a_name)
            _require(
                isinstance(row, dict),
                f"players[{i}].transitions[{s!r}][{a_name!r}] must be an object",
            )
            for y_name, prob in row.items():
                _require(
                    y_name in sidx,
                    f"players[{i}].transitions[{s!r}][{a_name!r}]: unknown state {y_name!r}",
                )
                _require(
                    isinstance(prob, (int, float)),
                    f"players[{i}].transitions[{s!r}][{a_name!r}][{y_name!r}] must be a number",
                )
                block[a, sidx[y_name]] = float(prob)
            block[a] = _renormalize(block[a])
        transitions.append(block)

    init_obj = obj.get("initial")
    _require(isinstance(init_obj, dict), f"players[{i}].initial must be an object")
    init = np.zeros(len(states))
    for s_name, prob in init_obj.items():
        _require(s_name in sidx, f"players[{i}].initial: unknown state {s_name!r}")
        _require(isinstance(prob, (int, float)), f"players[{i}].initial[{s_name!r}] must be a number")
        init[sidx[s_name]] = float(prob)
    init = _renormalize(init)
    return PlayerModel(i, states, tuple(actions), transitions, init)


def _parse_pair(player: PlayerModel, token: str, where: str) -> int:
    parts = token.split(":")
    _require(len(parts) == 2, f"{where}: key part {token!r} is not 'state:action'")
    s, a = parts
    _require(s in player.states, f"{where}: unknown state {s!r}")
    x = player.state_index(s)
    _require(a in player.actions_by_state[x], f"{where}: unknown action {a!r} at state {s!r}")
    return player.pair_index(x, player.action_index(x, a))


def _load_cost(players: list[PlayerModel], k: int, obj) -> CoupledCostTable:
    _require(isinstance(obj, dict), f"costs[{k}] must be an object")
    owner = obj.get("owner")
    index = obj.get("index")
    _require(isinstance(owner, int) and 0 <= owner < len(players), f"costs[{k}].owner out of range")
    _require(isinstance(index, int) and index >= 0, f"costs[{k}].index must be a non-negative integer")
    separable = bool(obj.get("separable", False))
    values_obj = obj.get("values")
    _require(isinstance(values_obj, dict), f"costs[{k}].values must be an object")
    where = f"costs[{k}].values"
    if separable:
        values = np.full(players[owner].n_pairs, np.nan)
        for key, v in values_obj.items():
            _require(
                "|" not in key,
                f"{where}: separable table must use local 'state:action' keys, got {key!r}",
            )
            _require(isinstance(v, (int, float)), f"{where}[{key!r}] must be a number")
            values[_parse_pair(players[owner], key, where)] = float(v)
    else:
        shape = tuple(p.n_pairs for p in players)
        values = np.full(shape, np.nan)
        for key, v in values_obj.items():
            tokens = key.split("|")
            _require(
                len(tokens) == len(players),
                f"{where}: key {key!r} must have one 'state:action' part per player",
            )
            _require(isinstance(v, (int, float)), f"{where}[{key!r}] must be a number")
            idx = tuple(
                _parse_pair(players[l], tok, where) for l, tok in enumerate(tokens)
            )
            values[idx] = float(v)
    return CoupledCostTable(owner, index, values, separable)


def load_game(source) -> GameModel:
    """Load a game from a path or readable stream.

    Raises ParseError for malformed JSON, SchemaError for structural
    mismatch. Semantic invariants (stochasticity, totality) are left to
    :func:`validate`.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as f:
            text = f.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno}, column {e.colno}: {e.msg}") from e

    _require(isinstance(doc, dict), "top level must be an object")
    players_obj = doc.get("players")
    _require(isinstance(players_obj, list), "'players' must be a list")
    _require(len(players_obj) >= 1, "at least one player required")
    players = [_load_player(i, p) for i, p in enumerate(players_obj)]

    costs_obj = doc.get("costs", [])
    _require(isinstance(costs_obj, list), "'costs' must be a list")
    costs = [_load_cost(players, k, c) for k, c in enumerate(costs_obj)]

    constraints_obj = doc.get("constraints", [])
    _require(isinstance(constraints_obj, list), "'constraints' must be a list")
    constraints = []
    seen_owner = set()
    for k, c in enumerate(constraints_obj):
        _require(isinstance(c, dict), f"constraints[{k}] must be an object")
        owner = c.get("owner")
        bounds = c.get("bounds")
        _require(
            isinstance(owner, int) and 0 <= owner < len(players),
            f"constraints[{k}].owner out of range",
        )
        _require(owner not in seen_owner, f"constraints[{k}]: duplicate owner {owner}")
        seen_owner.add(owner)
        _require(isinstance(bounds, list), f"constraints[{k}].bounds must be a list")
        _require(
            all(isinstance(b, (int, float)) for b in bounds),
            f"constraints[{k}].bounds must be numbers",
        )
        constraints.append(ConstraintSpec(owner, np.asarray(bounds, dtype=float)))

    metadata = {}
    if "name" in doc:
        metadata["name"] = doc["name"]
    if "description" in doc:
        metadata["description"] = doc["description"]
    return GameModel(players, costs, constraints, metadata)


def _dump_player(p: PlayerModel) -> dict:
    trans = {}
    for x, s in enumerate(p.states):
        rows = {}
        for a, a_name in enumerate(p.actions_by_state[x]):
            row = p.transitions[x][a]
            rows[a_name] = {
                p.states[y]: float(row[y]) for y in range(p.n_states) if row[y] != 0.0
            }
        trans[s] = rows
    return {
        "states": list(p.states),
        "actions": {s: list(p.actions_by_state[x]) for x, s in enumerate(p.states)},
        "transitions": trans,
        "initial": {
            p.states[y]: float(p.initial_dist[y])
            for y in range(p.n_states)
            if p.initial_dist[y] != 0.0
        },
    }


def _dump_cost(model: GameModel, t: CoupledCostTable) -> dict:
    if t.separable:
        names = model.players[t.owner].pair_names()
        values = {names[k]: float(v) for k, v in enumerate(t.values)}
    else:
        names = [p.pair_names() for p in model.players]
        values = {}
        for idx in itertools.product(*(range(p.n_pairs) for p in model.players)):
            v = t.values[idx]
            if not np.isnan(v):
                key = "|".join(names[l][k] for l, k in enumerate(idx))
                values[key] = float(v)
    return {
        "owner": t.owner,
        "index": t.cost_index,
        "separable": t.separable,
        "values": values,
    }


def save_game(model: GameModel, target) -> None:
    """Write a game as JSON to a path or writable stream.

    Round-trips: ``load_game`` of the written file reproduces the model with
    bitwise-equal numeric fields (rows that sum to exactly 1.0 are not
    touched by the loader's renormalization).
    """
    doc = {}
    if "name" in model.metadata:
        doc["name"] = model.metadata["name"]
    if "description" in model.metadata:
        doc["description"] = model.metadata["description"]
    doc["players"] = [_dump_player(p) for p in model.players]
    doc["costs"] = [_dump_cost(model, t) for t in model.costs]
    doc["constraints"] = [
        {"owner": c.owner, "bounds": [float(b) for b in c.bounds]}
        for c in model.constraints
    ]
    text = json.dumps(doc, indent=1)
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8") as f:
            f.write(text)
