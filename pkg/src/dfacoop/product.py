"""Cascade composition of TokenEnv with the task-vector MDP.

Each step: move the agents, label the resulting cells, progress every
agent's DFA by its own label (no label leaves the DFA unchanged), pay the
sparse team reward when the whole vector has just become accepting, and
shape each agent's reward with the potential "my own DFA is accepting".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import env
from .dfa import Dfa, DfaVector, is_trivial_accepting, progress_vector
from .encoder import encode
from .env import GridState, Layout
from .errors import AlphabetMismatchError, EpisodeOverError, InvalidConfigError

DEFAULT_GAMMA = 0.99


@dataclass(frozen=True)
class ProductState:
    grid: GridState
    tasks: DfaVector

    @property
    def terminal(self) -> bool:
        return self.grid.terminated or self.tasks.all_trivial


@dataclass(frozen=True)
class StepOutcome:
    next: ProductState
    team_reward: int
    shaped_rewards: tuple
    done: bool
    labels: tuple = ()


def potential(tasks: DfaVector, agent: int) -> int:
    return 1 if is_trivial_accepting(tasks[agent]) else 0


def initial_state(layout: Layout, tasks: Sequence[Dfa], seed=None, grid: Optional[GridState] = None) -> ProductState:
    tasks = DfaVector(tasks).minimized()
    if tasks.alphabet_size != layout.alphabet_size:
        raise AlphabetMismatchError(
            f"tasks use {tasks.alphabet_size} symbols, layout has {layout.alphabet_size}"
        )
    if len(tasks) != layout.n_agents:
        raise InvalidConfigError(f"{len(tasks)} tasks for {layout.n_agents} agents")
    return ProductState(env.reset(layout, seed) if grid is None else grid, tasks)


def product_step(layout: Layout, ps: ProductState, joint_action, gamma: float = DEFAULT_GAMMA) -> StepOutcome:
    if ps.terminal:
        raise EpisodeOverError("the product episode is over")
    if not 0 <= gamma < 1:
        raise InvalidConfigError("gamma must lie in [0, 1)")
    grid = env.step(layout, ps.grid, joint_action)
    labs = env.labels(layout, grid)
    tasks = progress_vector(ps.tasks, labs)
    team = 1 if tasks.all_accepting and not ps.tasks.all_accepting else 0
    shaped = tuple(
        team + gamma * potential(tasks, i) - potential(ps.tasks, i) for i in range(len(tasks))
    )
    nxt = ProductState(grid, tasks)
    return StepOutcome(nxt, team, shaped, nxt.terminal, labs)


# -- policies ---------------------------------------------------------------

Policy = Callable[[ProductState, np.random.Generator], tuple]


class RandomPolicy:
    """Uniform over joint actions."""

    def __init__(self, n_agents: int):
        self.n_agents = n_agents

    def __call__(self, ps, rng):
        return tuple(int(a) for a in rng.integers(env.N_ACTIONS, size=self.n_agents))

    def distribution(self, ps):
        p = 1.0 / env.N_ACTIONS ** self.n_agents
        return np.full(env.N_ACTIONS ** self.n_agents, p)


class ScriptedPolicy:
    """Plays a fixed list of joint actions, then no-ops."""

    def __init__(self, actions: Sequence[Sequence[int]], n_agents: int):
        self.actions = [tuple(a) for a in actions]
        self.n_agents = n_agents

    def __call__(self, ps, rng):
        t = ps.grid.step_count
        return self.actions[t] if t < len(self.actions) else (env.NOOP,) * self.n_agents


# -- rollouts and traces ------------------------------------------------------


@dataclass
class Rollout:
    trace: list
    team_return: float
    shaped_returns: list
    success: bool
    steps: int
    initial: ProductState
    final: ProductState
    outcomes: list = field(default_factory=list, repr=False)


def _task_hashes(tasks: DfaVector) -> list:
    return [encode(a).short() for a in tasks]


def _header(layout, ps, gamma, seed) -> dict:
    return {
        "kind": "header",
        "layout": layout.digest,
        "n_agents": layout.n_agents,
        "gamma": gamma,
        "seed": seed,
        "positions": [list(p) for p in ps.grid.positions],
        "tasks": [a.to_hex() for a in ps.tasks],
        "task_hashes": _task_hashes(ps.tasks),
    }


def rollout(
    layout: Layout,
    init_tasks: Sequence[Dfa],
    policy: Policy,
    gamma: float = DEFAULT_GAMMA,
    seed: int = 0,
    grid: Optional[GridState] = None,
) -> Rollout:
    """Run one episode until the grid times out or every task is trivial."""
    from .sampling import make_rng

    ps = initial_state(layout, init_tasks, make_rng(seed, 0), grid)
    policy_rng = make_rng(seed, 1)
    first = ps
    trace = [_header(layout, ps, gamma, seed)]
    outcomes = []
    n = layout.n_agents
    team_return = 0.0
    shaped_returns = [0.0] * n
    discount = 1.0
    t = 0
    while not ps.terminal:
        action = tuple(int(a) for a in policy(ps, policy_rng))
        out = product_step(layout, ps, action, gamma)
        team_return += discount * out.team_reward
        for i in range(n):
            shaped_returns[i] += discount * out.shaped_rewards[i]
        discount *= gamma
        t += 1
        rec = env.trace_record(t, out.next.grid, layout, action)
        rec["labels"] = list(out.labels)
        rec["task_hashes"] = _task_hashes(out.next.tasks)
        rec["team_reward"] = out.team_reward
        rec["shaped_rewards"] = list(out.shaped_rewards)
        rec["done"] = out.done
        trace.append(rec)
        outcomes.append(out)
        ps = out.next
    return Rollout(
        trace=trace,
        team_return=team_return,
        shaped_returns=shaped_returns,
        success=ps.tasks.all_accepting,
        steps=t,
        initial=first,
        final=ps,
        outcomes=outcomes,
    )


def telescoping_gap(r: Rollout, gamma: float) -> float:
    """Largest |shaped return - (team return + gamma^T phi(final) - phi(initial))| over agents."""
    n = len(r.shaped_returns)
    gT = gamma ** r.steps
    return max(
        abs(
            r.shaped_returns[i]
            - (r.team_return + gT * potential(r.final.tasks, i) - potential(r.initial.tasks, i))
        )
        for i in range(n)
    )


def write_product_trace(trace: list, path: Union[str, Path]) -> None:
    env.write_trace(trace, path)


def replay_trace(layout: Layout, records: list) -> list:
    """Re-derive every step of a product trace; return a list of mismatch messages."""
    head, steps = records[0], records[1:]
    if head.get("kind") != "header":
        return ["trace has no header record"]
    problems = []
    if head["layout"] != layout.digest:
        problems.append("layout digest differs from the trace header")
    tasks = DfaVector(Dfa.from_hex(h) for h in head["tasks"])
    grid = GridState(tuple(tuple(p) for p in head["positions"]))
    ps = ProductState(grid, tasks.minimized())
    gamma = head["gamma"]
    for rec in steps:
        out = product_step(layout, ps, tuple(rec["joint_action"]), gamma)
        t = rec["step"]
        if [list(p) for p in out.next.grid.positions] != rec["positions"]:
            problems.append(f"step {t}: positions differ")
        if out.team_reward != rec["team_reward"]:
            problems.append(f"step {t}: team reward {out.team_reward} != {rec['team_reward']}")
        if list(out.shaped_rewards) != rec["shaped_rewards"]:
            problems.append(f"step {t}: shaped rewards differ")
        if _task_hashes(out.next.tasks) != rec["task_hashes"]:
            problems.append(f"step {t}: task vector differs")
        ps = out.next
    return problems


def dump_rollout_summary(r: Rollout) -> str:
    return json.dumps(
        {
            "success": r.success,
            "steps": r.steps,
            "team_return": r.team_return,
            "shaped_returns": r.shaped_returns,
        }
    )
