"""Test-time assignment of a task vector to agents.

Every distinct permutation of the tasks is scored by the summed per-agent
values at the initial product state, and the best one is returned. Ties go
to the lexicographically first permutation, which is the identity whenever
the identity is among the best.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .dfa import DfaVector
from .encoder import encode
from .env import Layout
from .errors import CapExceededError, InvalidConfigError
from .product import DEFAULT_GAMMA, rollout
from .sampling import make_rng
from . import solvers

DEFAULT_MAX_AGENTS = 8


@dataclass(frozen=True)
class ValueEstimate:
    per_agent: tuple
    # standard error of the summed value; None for exact values
    stderr: Optional[float] = None

    @property
    def total(self) -> float:
        return float(sum(self.per_agent))


@dataclass(frozen=True)
class Assignment:
    """Agent ``i`` receives ``tasks[permutation[i]]``."""

    permutation: tuple
    proxy_value: float
    per_agent_values: tuple
    tied: bool = False
    candidates: tuple = field(default=(), repr=False)

    def apply(self, tasks: Sequence) -> DfaVector:
        return DfaVector(tasks).permuted(self.permutation)

    def records(self) -> list:
        """One dict per evaluated permutation, the chosen one marked."""
        return [
            {
                "permutation": list(perm),
                "proxy_value": est.total,
                "per_agent_values": list(est.per_agent),
                "stderr": est.stderr,
                "chosen": perm == self.permutation,
            }
            for perm, est in self.candidates
        ]


ValueFn = Callable[[Layout, DfaVector, int], ValueEstimate]


class ExactValue:
    """V_i at the initial state: each agent's shaped return under the team-optimal greedy policy."""

    def __init__(self, gamma: float = DEFAULT_GAMMA):
        self.gamma = gamma

    def __call__(self, layout: Layout, tasks: DfaVector, seed: int = 0) -> ValueEstimate:
        game = solvers.enumerate_product(layout, tasks, self.gamma)
        pi = solvers.greedy_matrix(game, solvers.value_iteration(game))
        vals = []
        for i in range(layout.n_agents):
            V = solvers.policy_evaluation(game, pi, reward=i)
            vals.append(float(sum(p * V[s] for s, p in game.initial)))
        return ValueEstimate(tuple(vals))


class MonteCarloValue:
    """Mean discounted shaped return per agent over seeded rollouts."""

    def __init__(self, policy, episodes: int = 200, gamma: float = DEFAULT_GAMMA):
        self.policy = policy
        self.episodes = episodes
        self.gamma = gamma

    def __call__(self, layout: Layout, tasks: DfaVector, seed: int = 0) -> ValueEstimate:
        returns = np.empty((self.episodes, layout.n_agents))
        pol = _resolve(self.policy, layout, tasks)
        for e in range(self.episodes):
            r = rollout(layout, tasks, pol, self.gamma, seed=int(make_rng(seed, 6, e).integers(2 ** 62)))
            returns[e] = r.shaped_returns
        sums = returns.sum(axis=1)
        se = float(sums.std(ddof=1) / math.sqrt(self.episodes)) if self.episodes > 1 else 0.0
        return ValueEstimate(tuple(float(x) for x in returns.mean(axis=0)), se)


def _resolve(policy, layout, tasks):
    """A policy object, or a factory ``(layout, tasks) -> policy`` flagged by ``per_tasks``."""
    if getattr(policy, "per_tasks", False):
        return policy(layout, tasks)
    return policy


def optimal_policy(gamma: float = DEFAULT_GAMMA):
    """Factory giving the exact team-optimal greedy policy for each task vector."""
    cache = {}

    def make(layout, tasks):
        key = (layout.digest, tuple(encode(a) for a in tasks))
        if key not in cache:
            game = solvers.enumerate_product(layout, tasks, gamma)
            cache[key] = solvers.GreedyPolicy(game, solvers.value_iteration(game))
        return cache[key]

    make.per_tasks = True
    return make


def distinct_permutations(tasks: Sequence) -> list:
    """Lexicographic permutations, dropping those that repeat an already seen code tuple."""
    codes = [encode(a) for a in tasks]
    seen = set()
    out = []
    for perm in itertools.permutations(range(len(tasks))):
        key = tuple(codes[p] for p in perm)
        if key not in seen:
            seen.add(key)
            out.append(perm)
    return out


def assign_optimal(
    layout: Layout,
    tasks: Sequence,
    value_fn: ValueFn,
    seed: int = 0,
    cap: int = DEFAULT_MAX_AGENTS,
) -> Assignment:
    """Best permutation of ``tasks`` under ``value_fn``.

    With Monte Carlo values, a winner whose lead over the identity is within
    one standard error is replaced by the identity and flagged as tied.
    """
    tasks = DfaVector(tasks)
    n = len(tasks)
    if n > cap:
        raise CapExceededError(f"{n} agents exceed the assignment cap of {cap} ({math.factorial(n)} permutations)")
    candidates = []
    for perm in distinct_permutations(tasks):
        candidates.append((perm, value_fn(layout, tasks.permuted(perm), seed)))
    best_perm, best = candidates[0]
    for perm, est in candidates[1:]:
        if est.total > best.total:
            best_perm, best = perm, est
    identity_perm, identity = candidates[0]
    if best_perm != identity_perm and best.stderr is not None:
        if best.total - identity.total <= math.hypot(best.stderr, identity.stderr or 0.0):
            best_perm, best = identity_perm, identity
    tied = any(
        perm != best_perm and abs(est.total - best.total) <= math.hypot(best.stderr or 0.0, est.stderr or 0.0)
        for perm, est in candidates
    )
    return Assignment(best_perm, best.total, best.per_agent, tied, tuple(candidates))


def evaluate_assignment(
    layout: Layout,
    tasks: Sequence,
    assignment,
    policy,
    episodes: int,
    seed: int = 0,
) -> tuple:
    """Monte Carlo success ``(mean, stderr)`` under a fixed assignment.

    ``assignment`` may be an :class:`Assignment`, a permutation, or
    ``"random"`` for a fresh uniform permutation every episode. Episodes
    share seeds across calls so paired comparisons use common randomness.
    """
    if episodes < 1:
        raise InvalidConfigError("episodes must be positive")
    tasks = DfaVector(tasks)
    n = len(tasks)
    if isinstance(assignment, Assignment):
        assignment = assignment.permutation
    flags = np.empty(episodes)
    for e in range(episodes):
        if isinstance(assignment, str) and assignment == "random":
            perm = tuple(int(p) for p in make_rng(seed, 5, e).permutation(n))
        else:
            perm = tuple(assignment)
        vec = tasks.permuted(perm)
        pol = _resolve(policy, layout, vec)
        flags[e] = rollout(layout, vec, pol, seed=int(make_rng(seed, 4, e).integers(2 ** 62))).success
    se = float(flags.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return float(flags.mean()), se


def exact_assignment_success(layout: Layout, tasks: Sequence, perm: Sequence[int], gamma: float = DEFAULT_GAMMA) -> float:
    """Exact success of the team-optimal greedy policy for one permutation."""
    vec = DfaVector(tasks).permuted(perm)
    game = solvers.enumerate_product(layout, vec, gamma)
    return solvers.greedy_success(game, solvers.value_iteration(game))
