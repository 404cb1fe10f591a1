"""Exact tabular solvers for small product games.

The enumerated game is time-free: a state is (agent positions, minimized
task vector), and episode timeouts are applied only when a policy is
evaluated. TokenEnv is deterministic, so discounting makes greedy policies
take the fastest route to success, which is what makes the time-free
stationary solution optimal under any horizon.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import env
from .dfa import Dfa, DfaVector, is_plan
from .encoder import encode_vector
from .env import GridState, Layout
from .errors import CapExceededError, InvalidConfigError, ManifestMismatchError
from .product import DEFAULT_GAMMA, ProductState, initial_state, product_step, rollout
from .sampling import make_rng

DEFAULT_STATE_CAP = 2_000_000


def joint_actions(n_agents: int) -> list:
    return list(itertools.product(range(env.N_ACTIONS), repeat=n_agents))


def joint_index(action: Sequence[int]) -> int:
    idx = 0
    for a in action:
        idx = idx * env.N_ACTIONS + int(a)
    return idx


def _time_free(ps: ProductState) -> ProductState:
    return ProductState(GridState(ps.grid.positions), ps.tasks)


@dataclass
class EnumeratedGame:
    layout: Layout
    gamma: float
    states: list
    index: dict
    joint_actions: list
    next_state: np.ndarray
    team_reward: np.ndarray
    shaped_reward: np.ndarray
    done: np.ndarray
    terminal: np.ndarray
    success: np.ndarray
    initial: list

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_agents(self) -> int:
        return self.layout.n_agents

    def reward(self, kind: Union[str, int] = "team") -> np.ndarray:
        """``"team"``, ``"shaped_sum"``, or an agent index for that agent's shaped reward."""
        if kind == "team":
            return self.team_reward
        if kind == "shaped_sum":
            return self.shaped_reward.sum(axis=0)
        if isinstance(kind, (int, np.integer)) and 0 <= kind < self.n_agents:
            return self.shaped_reward[kind]
        raise InvalidConfigError(f"unknown reward kind {kind!r}")

    def lookup(self, ps: ProductState) -> int:
        return self.index[_time_free(ps)]


def enumerate_product(
    layout: Layout,
    init_tasks: Sequence[Dfa],
    gamma: float = DEFAULT_GAMMA,
    cap: int = DEFAULT_STATE_CAP,
) -> EnumeratedGame:
    """Breadth-first closure of the product game from every initial state.

    Terminal states (all tasks trivial) are absorbing with zero reward.
    """
    acts = joint_actions(layout.n_agents)
    starts = []
    for positions, p in env.spawn_support(layout):
        starts.append((initial_state(layout, init_tasks, grid=GridState(positions)), p))
    states: list = []
    index: dict = {}
    initial = []
    for ps, p in starts:
        ps = _time_free(ps)
        if ps not in index:
            index[ps] = len(states)
            states.append(ps)
        initial.append((index[ps], p))

    rows_next, rows_team, rows_shaped, rows_done = [], [], [], []
    i = 0
    n = layout.n_agents
    # stepping needs a non-expiring clock; timeouts are applied at evaluation
    free = layout.replace(max_steps=10 ** 9)
    while i < len(states):
        ps = states[i]
        if ps.terminal:
            rows_next.append([i] * len(acts))
            rows_team.append([0] * len(acts))
            rows_shaped.append([[0.0] * n] * len(acts))
            rows_done.append([True] * len(acts))
        else:
            nxt, team, shaped, done = [], [], [], []
            for a in acts:
                out = product_step(free, ps, a, gamma)
                q = _time_free(out.next)
                j = index.get(q)
                if j is None:
                    if len(states) >= cap:
                        raise CapExceededError(
                            f"reachable product space exceeds the cap of {cap} states"
                        )
                    j = index[q] = len(states)
                    states.append(q)
                nxt.append(j)
                team.append(out.team_reward)
                shaped.append(out.shaped_rewards)
                done.append(out.next.terminal)
            rows_next.append(nxt)
            rows_team.append(team)
            rows_shaped.append(shaped)
            rows_done.append(done)
        i += 1
    shaped_arr = np.asarray(rows_shaped, dtype=np.float64).reshape(len(states), len(acts), n)
    return EnumeratedGame(
        layout=layout,
        gamma=gamma,
        states=states,
        index=index,
        joint_actions=acts,
        next_state=np.asarray(rows_next, dtype=np.int64),
        team_reward=np.asarray(rows_team, dtype=np.float64),
        shaped_reward=np.ascontiguousarray(shaped_arr.transpose(2, 0, 1)),
        done=np.asarray(rows_done, dtype=bool),
        terminal=np.array([s.terminal for s in states], dtype=bool),
        success=np.array([s.tasks.all_accepting for s in states], dtype=bool),
        initial=initial,
    )


@dataclass
class ValueTable:
    values: np.ndarray
    q_values: np.ndarray
    policy: np.ndarray
    residuals: list
    reward: Union[str, int] = "team"

    def initial_value(self, game: EnumeratedGame) -> float:
        return float(sum(p * self.values[s] for s, p in game.initial))


def value_iteration(
    game: EnumeratedGame,
    tolerance: float = 1e-10,
    reward: Union[str, int] = "team",
    max_sweeps: int = 1_000_000,
) -> ValueTable:
    """Synchronous sweeps until the sup-norm Bellman residual drops below ``tolerance``.

    The greedy policy breaks ties toward the lowest joint-action index.
    """
    R = game.reward(reward)
    cont = game.gamma * (~game.done)
    V = np.zeros(game.n_states)
    residuals = []
    Q = R.copy()
    for _ in range(max_sweeps):
        Q = R + cont * V[game.next_state]
        new = Q.max(axis=1)
        res = float(np.max(np.abs(new - V))) if game.n_states else 0.0
        V = new
        residuals.append(res)
        if res < tolerance:
            break
    return ValueTable(V, Q, np.argmax(Q, axis=1), residuals, reward)


def policy_evaluation(
    game: EnumeratedGame,
    pi: np.ndarray,
    reward: Union[str, int] = "team",
    tolerance: float = 1e-12,
    max_sweeps: int = 1_000_000,
) -> np.ndarray:
    """Discounted value of a fixed [state, joint action] policy matrix."""
    R = (pi * game.reward(reward)).sum(axis=1)
    cont = game.gamma * (~game.done)
    V = np.zeros(game.n_states)
    for _ in range(max_sweeps):
        new = R + (pi * cont * V[game.next_state]).sum(axis=1)
        res = float(np.max(np.abs(new - V))) if game.n_states else 0.0
        V = new
        if res < tolerance:
            break
    return V


def greedy_matrix(game: EnumeratedGame, table: ValueTable) -> np.ndarray:
    pi = np.zeros((game.n_states, len(game.joint_actions)))
    pi[np.arange(game.n_states), table.policy] = 1.0
    return pi


def policy_matrix(game: EnumeratedGame, policy) -> np.ndarray:
    """Row-stochastic [state, joint action] matrix of a policy object.

    Policies exposing ``distribution(ps)`` are used as is; others are
    treated as deterministic and queried once per state.
    """
    A = len(game.joint_actions)
    pi = np.zeros((game.n_states, A))
    for s, ps in enumerate(game.states):
        if hasattr(policy, "distribution"):
            pi[s] = policy.distribution(ps)
        else:
            pi[s, joint_index(policy(ps, None))] = 1.0
    return pi


def exact_success(game: EnumeratedGame, pi: np.ndarray, horizon: Optional[int] = None) -> float:
    """Probability that all tasks become accepting within ``horizon`` steps.

    Backward induction over remaining steps; ``horizon`` defaults to the
    layout's episode cap.
    """
    horizon = game.layout.max_steps if horizon is None else horizon
    succ = game.success.astype(np.float64)
    P = succ.copy()
    for _ in range(horizon):
        P = np.where(game.terminal, succ, (pi * P[game.next_state]).sum(axis=1))
    return float(sum(p * P[s] for s, p in game.initial))


def greedy_success(game: EnumeratedGame, table: ValueTable, horizon: Optional[int] = None) -> float:
    return exact_success(game, greedy_matrix(game, table), horizon)


class GreedyPolicy:
    """Centralized greedy joint policy read from a value table."""

    def __init__(self, game: EnumeratedGame, table: ValueTable):
        self.game = game
        self.table = table

    def __call__(self, ps, rng=None):
        return self.game.joint_actions[int(self.table.policy[self.game.lookup(ps)])]

    def distribution(self, ps):
        d = np.zeros(len(self.game.joint_actions))
        d[int(self.table.policy[self.game.lookup(ps)])] = 1.0
        return d


def solve_optimal(layout, tasks, gamma=DEFAULT_GAMMA, reward="team", tolerance=1e-10):
    """Enumerate, solve, and return ``(game, table, greedy success probability)``."""
    game = enumerate_product(layout, tasks, gamma)
    table = value_iteration(game, tolerance, reward)
    return game, table, greedy_success(game, table)


# -- history-dependent brute force ---------------------------------------------


def brute_force_history_optimum(
    layout: Layout,
    init_tasks: Sequence[Dfa],
    horizon: Optional[int] = None,
    cap: int = 5_000_000,
) -> float:
    """Best undiscounted probability that every agent's labeled trace satisfies its DFA.

    Optimizes over deterministic history-dependent joint policies by
    expectimax on (positions, raw DFA states, time). The raw automaton states
    summarize the labeled history exactly, so the memo is lossless. The DFAs
    are run as given, without minimization or progression.
    """
    horizon = layout.max_steps if horizon is None else horizon
    tasks = list(init_tasks)
    if len(tasks) != layout.n_agents:
        raise InvalidConfigError(f"{len(tasks)} tasks for {layout.n_agents} agents")
    for a in tasks:
        if not is_plan(a):
            raise InvalidConfigError("brute force expects plan DFAs")
    acts = joint_actions(layout.n_agents)
    free = layout.replace(max_steps=10 ** 9)
    memo: dict = {}

    def advance(qs, positions):
        out = []
        for a, q, p in zip(tasks, qs, positions):
            sym = layout.tokens.get(p)
            out.append(q if sym is None else a.transitions[q][sym])
        return tuple(out)

    def satisfied(qs):
        return all(q in a.accepting for a, q in zip(tasks, qs))

    def value(positions, qs, t):
        if satisfied(qs):
            return 1.0
        if t == horizon:
            return 0.0
        key = (positions, qs, t)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if len(memo) >= cap:
            raise CapExceededError(f"history enumeration exceeds {cap} nodes")
        best = 0.0
        grid = GridState(positions)
        for a in acts:
            nxt = env.step(free, grid, a).positions
            v = value(nxt, advance(qs, nxt), t + 1)
            if v > best:
                best = v
                if best == 1.0:
                    break
        memo[key] = best
        return best

    total = 0.0
    for positions, p in env.spawn_support(layout):
        qs = advance(tuple(a.initial for a in tasks), positions)
        total += p * value(tuple(positions), qs, 0)
    return total


# -- independent tabular Q-learning -------------------------------------------


@dataclass
class QConfig:
    steps: int = 50_000
    alpha: float = 0.5
    gamma: float = DEFAULT_GAMMA
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    # fraction of the budget over which epsilon decays linearly
    epsilon_decay: float = 0.8
    reward: str = "shaped"
    seed: int = 0

    def __post_init__(self):
        if self.reward not in ("shaped", "sparse"):
            raise InvalidConfigError(f"unknown reward {self.reward!r}")
        if self.steps < 0:
            raise InvalidConfigError("steps must be non-negative")

    def epsilon(self, t: int) -> float:
        span = max(1.0, self.epsilon_decay * self.steps)
        frac = min(1.0, t / span)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


def agent_key(layout: Layout, ps: ProductState, agent: int) -> tuple:
    """(ego observation digest, task codes ordered by agent index)."""
    codes = tuple(c.digest for c in encode_vector(ps.tasks))
    return env.ego_digest(layout, ps.grid, agent), codes


class QPolicy:
    """Decentralized greedy policy over per-agent Q tables.

    Unseen keys act uniformly at random, so an untrained policy is the
    uniform-random baseline.
    """

    def __init__(self, layout: Layout, tables: list):
        self.layout = layout
        self.tables = tables

    def agent_distribution(self, ps, i) -> np.ndarray:
        q = self.tables[i].get(agent_key(self.layout, ps, i))
        d = np.zeros(env.N_ACTIONS)
        if q is None:
            d[:] = 1.0 / env.N_ACTIONS
        else:
            d[int(np.argmax(q))] = 1.0
        return d

    def distribution(self, ps) -> np.ndarray:
        joint = np.ones(1)
        for i in range(self.layout.n_agents):
            joint = np.outer(joint, self.agent_distribution(ps, i)).ravel()
        return joint

    def __call__(self, ps, rng):
        out = []
        for i in range(self.layout.n_agents):
            d = self.agent_distribution(ps, i)
            nz = np.flatnonzero(d)
            out.append(int(nz[0]) if len(nz) == 1 else int(rng.integers(env.N_ACTIONS)))
        return tuple(out)


@dataclass
class QLearningResult:
    tables: list
    config: QConfig
    episodes: int
    successes: int

    def policy(self, layout: Layout) -> QPolicy:
        return QPolicy(layout, self.tables)


def _prior(task_prior):
    if callable(task_prior):
        return task_prior
    fixed = DfaVector(task_prior)
    return lambda rng: fixed


def q_learning(layout: Layout, task_prior, config: QConfig = QConfig()) -> QLearningResult:
    """Independent epsilon-greedy Q-learning, one table per agent.

    ``task_prior`` is a fixed task vector or ``rng -> DfaVector``. Each agent
    learns from its shaped reward (or the sparse team reward); timeouts
    bootstrap, task-terminal transitions do not.
    """
    n = layout.n_agents
    tables: list = [dict() for _ in range(n)]
    rng = make_rng(config.seed, 2)
    prior = _prior(task_prior)
    g, alpha = config.gamma, config.alpha
    t = episodes = successes = 0
    while t < config.steps:
        ps = initial_state(layout, prior(rng), rng)
        episodes += 1
        keys = [agent_key(layout, ps, i) for i in range(n)]
        while not ps.terminal and t < config.steps:
            eps = config.epsilon(t)
            action = []
            for i in range(n):
                q = tables[i].get(keys[i])
                if q is None or rng.random() < eps:
                    action.append(int(rng.integers(env.N_ACTIONS)))
                else:
                    action.append(int(np.argmax(q)))
            out = product_step(layout, ps, action, g)
            nxt = out.next
            final = nxt.tasks.all_trivial
            next_keys = [agent_key(layout, nxt, i) for i in range(n)]
            for i in range(n):
                r = out.shaped_rewards[i] if config.reward == "shaped" else out.team_reward
                q = tables[i].setdefault(keys[i], np.zeros(env.N_ACTIONS))
                target = r
                if not final:
                    qn = tables[i].get(next_keys[i])
                    if qn is not None:
                        target += g * float(qn.max())
                q[action[i]] += alpha * (target - q[action[i]])
            ps, keys = nxt, next_keys
            t += 1
        successes += int(ps.tasks.all_accepting)
    return QLearningResult(tables, config, episodes, successes)


# -- Monte Carlo evaluation ---------------------------------------------------


def estimate_success(layout: Layout, tasks, policy, episodes: int, seed: int = 0) -> tuple:
    """Mean success flag over seeded episodes and its standard error."""
    if episodes < 1:
        raise InvalidConfigError("episodes must be positive")
    prior = _prior(tasks)
    flags = np.empty(episodes)
    for e in range(episodes):
        vec = prior(make_rng(seed, 3, e))
        flags[e] = rollout(layout, vec, policy, seed=int(make_rng(seed, 4, e).integers(2 ** 62))).success
    mean = float(flags.mean())
    stderr = float(flags.std(ddof=1) / np.sqrt(episodes)) if episodes > 1 else 0.0
    return mean, stderr


# -- persistence --------------------------------------------------------------


def save_qtables(path: Union[str, Path], result: QLearningResult, manifest: dict) -> None:
    """``<path>.npz`` with one key/value array pair per agent plus ``<path>.json`` manifest."""
    path = Path(path)
    arrays = {}
    for i, table in enumerate(result.tables):
        keys = sorted(table)
        arrays[f"keys_{i}"] = np.array(
            [k[0].hex() + ":" + ",".join(c.hex() for c in k[1]) for k in keys], dtype=str
        )
        arrays[f"values_{i}"] = (
            np.stack([table[k] for k in keys]) if keys else np.zeros((0, env.N_ACTIONS))
        )
    np.savez(path.with_suffix(".npz"), **arrays)
    doc = dict(manifest, n_agents=len(result.tables), config=asdict(result.config))
    path.with_suffix(".json").write_text(json.dumps(doc, sort_keys=True, indent=1))


def load_qtables(path: Union[str, Path], expect: Optional[dict] = None) -> tuple:
    """Load tables saved by :func:`save_qtables`; refuse on manifest mismatch."""
    path = Path(path)
    manifest = json.loads(path.with_suffix(".json").read_text())
    for key, want in (expect or {}).items():
        if manifest.get(key) != want:
            raise ManifestMismatchError(f"manifest {key}={manifest.get(key)!r}, expected {want!r}")
    data = np.load(path.with_suffix(".npz"))
    tables = []
    for i in range(manifest["n_agents"]):
        table = {}
        for k, v in zip(data[f"keys_{i}"], data[f"values_{i}"]):
            ego, codes = str(k).split(":")
            table[(bytes.fromhex(ego), tuple(bytes.fromhex(c) for c in codes.split(",")))] = v.copy()
        tables.append(table)
    return tables, manifest
