from collections import Counter

import pytest

from dfacoop.dfa import Dfa, accepts, is_plan, is_trivial, is_trivial_accepting, minimize
from dfacoop.errors import InvalidConfigError, SamplerError
from dfacoop import sampling
from dfacoop.sampling import (
    SamplerConfig,
    make_rng,
    sample_batch,
    sample_multi_agent,
    sample_rad,
    sample_reach,
    sample_reach_avoid,
    sample_state_count,
    sample_vector_batch,
)

SAMPLERS = [sample_reach, sample_reach_avoid, sample_rad]


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        SamplerConfig(max_states=1)
    with pytest.raises(InvalidConfigError):
        SamplerConfig(stutter_promotion_prob=1.5)
    with pytest.raises(InvalidConfigError):
        SamplerConfig(state_count_law="poisson")
    with pytest.raises(InvalidConfigError):
        SamplerConfig.from_json('{"bogus": 1}')


def test_config_json_round_trip_with_overrides():
    cfg = SamplerConfig(max_states=7, rng_seed=3)
    back = SamplerConfig.from_json(cfg.to_json(), max_states=4, rng_seed=None)
    assert back.max_states == 4 and back.rng_seed == 3


@pytest.mark.parametrize("sampler", SAMPLERS)
def test_outputs_are_minimal_nontrivial_plans_within_bounds(sampler):
    cfg = SamplerConfig(max_states=5, alphabet_size=6, rng_seed=1)
    for a in sample_batch(cfg, sampler, 2000):
        # re-minimize an unflagged copy so the check cannot short-circuit
        assert minimize(Dfa(a.transitions, a.initial, a.accepting)).to_bytes() == a.to_bytes()
        assert is_plan(a)
        assert not is_trivial(a)
        assert 2 <= a.num_states <= 5
        assert a.alphabet_size == 6


@pytest.mark.parametrize("sampler", SAMPLERS)
def test_seeded_determinism(sampler):
    cfg = SamplerConfig(rng_seed=42)
    first = [a.to_bytes() for a in sample_batch(cfg, sampler, 200)]
    second = [a.to_bytes() for a in sample_batch(cfg, sampler, 200)]
    assert first == second
    other = [a.to_bytes() for a in sample_batch(SamplerConfig(rng_seed=43), sampler, 200)]
    assert first != other


def test_two_state_reach_is_single_goal():
    cfg = SamplerConfig(max_states=2, stutter_promotion_prob=0.0, alphabet_size=5)
    for a in sample_batch(cfg, sample_reach, 50):
        assert a.num_states == 2
        goals = [s for s in range(5) if a.transitions[0][s] == 1]
        assert len(goals) == 1


def test_reach_avoid_rejects_avoid_then_goal():
    cfg = SamplerConfig(max_states=3, stutter_promotion_prob=0.0, alphabet_size=5)
    three = [a for a in sample_batch(cfg, sample_reach_avoid, 100) if a.num_states == 3]
    assert three
    for a in three:
        row = a.transitions[0]
        goal = next(s for s in range(5) if row[s] != 0 and a.transitions[row[s]][0] == row[s] and row[s] in a.accepting)
        avoid = next(s for s in range(5) if row[s] != 0 and row[s] not in a.accepting)
        assert accepts(a, [goal])
        assert not accepts(a, [avoid, goal])


def test_zero_mutations_gives_the_chain():
    cfg = SamplerConfig(max_mutations=0)
    for i in range(200):
        assert sample_rad(cfg, make_rng(5, i)) == sampling._rad_chain(cfg, make_rng(5, i))


def test_chain_state_counts_are_uniform():
    cfg = SamplerConfig(max_states=5, max_mutations=0)
    counts = Counter(a.num_states for a in sample_batch(cfg, sample_rad, 8000))
    assert set(counts) == {2, 3, 4, 5}
    for c in counts.values():
        assert abs(c / 8000 - 0.25) < 0.02


def test_uniform_state_count_histogram():
    cfg = SamplerConfig(max_states=5)
    rng = make_rng(0)
    counts = Counter(sample_state_count(cfg, rng) for _ in range(20000))
    assert set(counts) == {2, 3, 4, 5}
    for c in counts.values():
        assert abs(c / 20000 - 0.25) < 0.02


def test_geometric_law_is_truncated_and_decreasing():
    cfg = SamplerConfig(max_states=10, state_count_law="geometric", geometric_p=0.5)
    rng = make_rng(0)
    counts = Counter(sample_state_count(cfg, rng) for _ in range(20000))
    assert max(counts) <= 10 and min(counts) >= 2
    assert abs(counts[2] / 20000 - 0.5 / (1 - 0.5 ** 9)) < 0.02


def test_multi_agent_single_agent_is_nontrivial():
    cfg = SamplerConfig(rng_seed=2)
    for v in sample_vector_batch(cfg, 1, sample_reach, 200):
        assert len(v) == 1 and not is_trivial(v[0])


def test_multi_agent_trivial_counts_and_positions():
    cfg = SamplerConfig(rng_seed=9)
    trivial_counts = Counter()
    positions = Counter()
    for v in sample_vector_batch(cfg, 4, sample_reach, 4000):
        t = [i for i, a in enumerate(v) if is_trivial_accepting(a)]
        trivial_counts[len(t)] += 1
        if len(t) == 1:
            positions[t[0]] += 1
        assert any(not is_trivial(a) for a in v)
    assert set(trivial_counts) == {0, 1, 2, 3}
    total = sum(positions.values())
    for p in range(4):
        assert abs(positions[p] / total - 0.25) < 0.04


def test_two_state_reach_avoid_draw_degrades_to_reach():
    cfg = SamplerConfig(max_states=2, stutter_promotion_prob=0.0)
    for a in sample_batch(cfg, sample_reach_avoid, 50):
        assert a.num_states == 2


def test_rejection_loop_fails_loudly():
    def always_trivial(cfg, rng):
        return Dfa.top(cfg.alphabet_size)

    with pytest.raises(SamplerError):
        sample_multi_agent(SamplerConfig(), 2, always_trivial, make_rng(0))


def test_make_rng_streams_are_independent_of_call_order():
    a = make_rng(1, 2).integers(1 << 30, size=4)
    make_rng(1, 3).integers(1 << 30, size=100)
    b = make_rng(1, 2).integers(1 << 30, size=4)
    assert (a == b).all()
    assert not (make_rng(1, 2).integers(1 << 30, size=4) == make_rng(1, 3).integers(1 << 30, size=4)).all()


def test_samplers_registry():
    assert set(sampling.SAMPLERS) == {"reach", "reachavoid", "rad"}
    assert sample_batch(SamplerConfig(), sampling.SAMPLERS["rad"], 3, start=5) == [
        sample_rad(SamplerConfig(), make_rng(0, i)) for i in range(5, 8)
    ]
