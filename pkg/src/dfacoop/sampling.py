"""Seeded generators for Reach, ReachAvoid and RAD task DFAs.

All randomness comes from :func:`make_rng`, a Philox counter-based generator
keyed by ``(seed, *path)`` through NumPy's ``SeedSequence``. Philox output is
fixed across platforms, and deriving one stream per draw index keeps batch
sampling reproducible regardless of how draws are distributed over workers.

``max_states`` bounds the total state count of every sampled DFA, including
the rejecting sink when one is present.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .dfa import Dfa, DfaVector, chain, is_trivial, minimize, renumber_minimal, sink_accepting
from .errors import InvalidConfigError, SamplerError

MAX_REJECTIONS = 1000


def make_rng(seed: int, *path: int) -> np.random.Generator:
    """Philox stream for ``(seed, *path)``; distinct paths give independent streams."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, path)])))


@dataclass(frozen=True)
class SamplerConfig:
    max_states: int = 5
    state_count_law: str = "uniform"
    geometric_p: float = 0.5
    alphabet_size: int = 10
    stutter_promotion_prob: float = 0.1
    rng_seed: int = 0
    # upper end of the Uniform(0, .) mutation count; None means the DFA's state count
    max_mutations: Optional[int] = None

    def __post_init__(self):
        if self.max_states < 2:
            raise InvalidConfigError("max_states must be at least 2")
        if self.state_count_law not in ("uniform", "geometric"):
            raise InvalidConfigError(f"unknown state_count_law {self.state_count_law!r}")
        if not 0 < self.geometric_p <= 1:
            raise InvalidConfigError("geometric_p must lie in (0, 1]")
        if self.alphabet_size < 2:
            raise InvalidConfigError("alphabet_size must be at least 2")
        if not 0 <= self.stutter_promotion_prob <= 1:
            raise InvalidConfigError("stutter_promotion_prob must lie in [0, 1]")
        if self.max_mutations is not None and self.max_mutations < 0:
            raise InvalidConfigError("max_mutations must be non-negative")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str, **overrides) -> "SamplerConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfigError(f"sampler config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InvalidConfigError("sampler config must be a JSON object")
        doc.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**doc)
        except TypeError as exc:
            raise InvalidConfigError(str(exc)) from exc


def sample_state_count(cfg: SamplerConfig, rng: np.random.Generator) -> int:
    """Draw a state count from {2, ..., max_states}.

    The geometric law is conditioned on the support (exact truncation, no
    rejection): P(n) is proportional to (1 - p) ** (n - 2).
    """
    if cfg.state_count_law == "uniform":
        return int(rng.integers(2, cfg.max_states + 1))
    support = np.arange(2, cfg.max_states + 1)
    pmf = (1 - cfg.geometric_p) ** (support - 2)
    return int(rng.choice(support, p=pmf / pmf.sum()))


def _build_chain(n_steps, with_avoid, cfg, rng, allow_avoid_promotion):
    """Random chain of one-step problems with stutter promotion, in minimal form.

    ``with_avoid[i]`` says whether step ``i`` carries a hard avoid constraint.
    Goals may repeat across consecutive steps. Every step has a non-empty
    reach set and advances at most one state per symbol, so chain state ``i``
    has shortest accepted word length ``n_steps - i`` and the reject sink
    accepts nothing: all states are distinguishable and only the BFS
    numbering of minimize() is needed.
    """
    k = cfg.alphabet_size
    p = cfg.stutter_promotion_prob
    # one uniform block per chain; numpy calls on tiny arrays cost more than the work
    steps = []
    for i, row in enumerate(rng.random((n_steps, 2 * k + 2)).tolist()):
        goal = int(row[0] * k)
        reach_set, avoid_set = {goal}, set()
        if with_avoid[i]:
            # avoid token drawn from the symbols other than the goal
            a = int(row[1] * (k - 1))
            avoid_set.add(a + (a >= goal))
        for s in range(k):
            if row[2 + s] >= p or s in reach_set or s in avoid_set:
                continue
            if allow_avoid_promotion and row[k + 2 + s] < 0.5:
                avoid_set.add(s)
            else:
                reach_set.add(s)
        steps.append((reach_set, avoid_set))
    return renumber_minimal(chain(steps, k, validate=False))


def _reach_chain(cfg, rng) -> Dfa:
    n = sample_state_count(cfg, rng)
    return _build_chain(n - 1, [False] * (n - 1), cfg, rng, False)


def _reach_avoid_chain(cfg, rng) -> Dfa:
    n = sample_state_count(cfg, rng)
    if n == 2:
        # no room for a rejecting sink under the state bound
        return _build_chain(1, [False], cfg, rng, False)
    return _build_chain(n - 2, [True] * (n - 2), cfg, rng, True)


def _rad_chain(cfg, rng) -> Dfa:
    n = sample_state_count(cfg, rng)
    flips = [bool(b) for b in rng.random(max(n - 2, 0)) < 0.5]
    if any(flips):
        return _build_chain(n - 2, flips, cfg, rng, True)
    return _build_chain(n - 1, [False] * (n - 1), cfg, rng, False)


def _mutate(a: Dfa, rng: np.random.Generator) -> Dfa:
    """Redirect one transition of a non-sink state to a uniformly drawn state."""
    n = a.num_states
    k = a.alphabet_size
    movable = [q for q, row in enumerate(a.transitions) if row.count(q) != k]
    if not movable:
        return a
    u = rng.random(3).tolist()
    q = movable[int(u[0] * len(movable))]
    s = int(u[1] * k)
    t = int(u[2] * n)
    rows = list(a.transitions)
    row = list(rows[q])
    row[s] = t
    rows[q] = tuple(row)
    return Dfa._trusted(tuple(rows), a.initial, a.accepting)


def _rng_for(cfg: SamplerConfig, rng: Optional[np.random.Generator]) -> np.random.Generator:
    return make_rng(cfg.rng_seed) if rng is None else rng


def sample_reach(cfg: SamplerConfig, rng: Optional[np.random.Generator] = None) -> Dfa:
    """Sequence of one-step Reach problems with stutter promotion, minimized."""
    return _reach_chain(cfg, _rng_for(cfg, rng))


def sample_reach_avoid(cfg: SamplerConfig, rng: Optional[np.random.Generator] = None) -> Dfa:
    """Sequence of one-step ReachAvoid problems with stutter promotion, minimized.

    A state count of 2 leaves no room for the rejecting sink, so such draws
    degrade to a single Reach step.
    """
    return _reach_avoid_chain(cfg, _rng_for(cfg, rng))


def sample_rad(cfg: SamplerConfig, rng: Optional[np.random.Generator] = None) -> Dfa:
    """Mixed Reach/ReachAvoid chain followed by ``m ~ Uniform(0, M)`` random mutations.

    Mutations that minimize to a trivial DFA are discarded.
    """
    rng = _rng_for(cfg, rng)
    a = _rad_chain(cfg, rng)
    top = a.num_states if cfg.max_mutations is None else cfg.max_mutations
    m = int(rng.integers(0, top + 1))
    for _ in range(m):
        b = minimize(sink_accepting(_mutate(a, rng)))
        if not is_trivial(b):
            a = b
    return a


SAMPLERS: dict[str, Callable[..., Dfa]] = {
    "reach": sample_reach,
    "reachavoid": sample_reach_avoid,
    "rad": sample_rad,
}


@lru_cache(maxsize=64)
def _top(k: int) -> Dfa:
    return Dfa.top(k)


def _draw_nontrivial(inner, cfg, rng) -> Dfa:
    for _ in range(MAX_REJECTIONS):
        a = inner(cfg, rng)
        if not is_trivial(a):
            return a
    raise SamplerError(f"inner sampler produced {MAX_REJECTIONS} trivial DFAs in a row")


def sample_multi_agent(
    cfg: SamplerConfig,
    n_agents: int,
    inner: Callable[..., Dfa] = sample_rad,
    rng: Optional[np.random.Generator] = None,
) -> DfaVector:
    """Assign ``n_trivial ~ Uniform(0, n - 1)`` helper agents the accepting DFA.

    The remaining agents get non-trivial draws from ``inner``; the vector is
    shuffled uniformly, so at least one entry is always non-trivial.
    """
    if n_agents < 1:
        raise InvalidConfigError("n_agents must be at least 1")
    rng = _rng_for(cfg, rng)
    n_trivial = int(rng.integers(0, n_agents))
    entries = [_top(cfg.alphabet_size)] * n_trivial
    entries += [_draw_nontrivial(inner, cfg, rng) for _ in range(n_agents - n_trivial)]
    order = rng.permutation(n_agents)
    return DfaVector(entries[i] for i in order)


def sample_batch(cfg: SamplerConfig, sampler: Callable[..., Dfa], count: int, start: int = 0):
    """Draws ``start .. start + count - 1``, each from its own derived stream."""
    return [sampler(cfg, make_rng(cfg.rng_seed, i)) for i in range(start, start + count)]


def sample_vector_batch(cfg, n_agents, inner, count, start=0):
    return [
        sample_multi_agent(cfg, n_agents, inner, make_rng(cfg.rng_seed, i))
        for i in range(start, start + count)
    ]
