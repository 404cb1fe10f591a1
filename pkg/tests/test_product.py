import itertools

import pytest

from dfacoop import env
from dfacoop.dfa import Dfa, DfaVector, accepts, is_trivial, reach, reach_avoid
from dfacoop.env import GridState, Layout
from dfacoop.errors import AlphabetMismatchError, EpisodeOverError, InvalidConfigError
from dfacoop.product import (
    ProductState,
    RandomPolicy,
    ScriptedPolicy,
    initial_state,
    potential,
    product_step,
    replay_trace,
    rollout,
    telescoping_gap,
    write_product_trace,
)

UP, DOWN, LEFT, RIGHT, NOOP = range(5)
K = 10

PAIR = Layout.from_ascii(f"alphabet: {K}\n@.8\n@.6\n")


def test_initial_state_checks_alphabet_and_agents():
    with pytest.raises(AlphabetMismatchError):
        initial_state(PAIR, [reach([8], 9), Dfa.top(9)])
    with pytest.raises(InvalidConfigError):
        initial_state(PAIR, [reach([8], K)])


def test_completing_last_task_pays_team_reward():
    ps = initial_state(PAIR, [reach([8], K), Dfa.top(K)])
    ps = ProductState(GridState(((0, 1), (1, 0))), ps.tasks)
    out = product_step(PAIR, ps, (RIGHT, NOOP))
    assert out.next.tasks.all_accepting
    assert out.team_reward == 1 and out.done
    assert out.shaped_rewards == pytest.approx((1 + 0.99, 1 + 0.99 - 1))


def test_own_completion_with_pending_partner_shapes_only():
    ps = initial_state(PAIR, [reach([8], K), reach([6], K)])
    ps = ProductState(GridState(((0, 1), (1, 0))), ps.tasks)
    out = product_step(PAIR, ps, (RIGHT, NOOP), gamma=0.99)
    assert out.team_reward == 0
    assert out.shaped_rewards == (0.99, 0.0)
    assert not out.done


def test_no_label_no_change():
    ps = initial_state(PAIR, [reach([8], K), reach([6], K)])
    out = product_step(PAIR, ps, (NOOP, UP))
    assert out.next.tasks == ps.tasks
    assert out.team_reward == 0 and out.shaped_rewards == (0.0, 0.0)
    assert out.labels == (None, None)


def test_potential():
    v = DfaVector([reach([8], K), Dfa.top(K)])
    assert potential(v, 0) == 0 and potential(v, 1) == 1
    assert all(potential(DfaVector.top(3, K), i) == 1 for i in range(3))


def test_terminal_rules_and_errors():
    ps = initial_state(PAIR, DfaVector.top(2, K))
    assert ps.terminal
    with pytest.raises(EpisodeOverError):
        product_step(PAIR, ps, (NOOP, NOOP))
    mixed = initial_state(PAIR, [Dfa.top(K), Dfa.bottom(K)])
    assert mixed.terminal and not mixed.tasks.all_accepting
    ok = initial_state(PAIR, [reach([8], K), Dfa.top(K)])
    with pytest.raises(InvalidConfigError):
        product_step(PAIR, ok, (NOOP, NOOP), gamma=1.0)


def test_all_top_rollout_is_zero_steps():
    r = rollout(PAIR, DfaVector.top(2, K), RandomPolicy(2))
    assert r.steps == 0 and r.success and r.team_return == 0
    assert len(r.trace) == 1


def test_rejecting_entry_blocks_success():
    lay = Layout.from_ascii(f"alphabet: {K}\n@18\n")
    # stepping on 1 kills the task, then 8 is reached but cannot help
    r = rollout(lay, [reach_avoid(8, [1], K)], ScriptedPolicy([(RIGHT,), (RIGHT,)], 1))
    assert not r.success and r.steps == 1
    assert r.final.tasks[0] == Dfa.bottom(K)


def test_absorption_is_monotone():
    lay = Layout.from_ascii(f"alphabet: {K}\nmax_steps: 30\n@.8\n.@6\n")
    for seed in range(20):
        r = rollout(lay, [reach([8, 6], K), reach([6], K)], RandomPolicy(2), seed=seed)
        done = [False, False]
        for out in r.outcomes:
            for i, a in enumerate(out.next.tasks):
                if done[i]:
                    assert is_trivial(a)
                done[i] = done[i] or is_trivial(a)


def test_rollout_is_seeded_and_telescopes():
    lay = Layout.from_ascii(f"alphabet: {K}\nmax_steps: 40\n@.8.\n..6.\n@...\n")
    tasks = [reach([8, 6], K), reach([6], K)]
    for seed in range(30):
        a = rollout(lay, tasks, RandomPolicy(2), seed=seed)
        b = rollout(lay, tasks, RandomPolicy(2), seed=seed)
        assert a.trace == b.trace
        assert telescoping_gap(a, 0.99) <= 1e-12


def test_summed_shaped_return_telescopes():
    lay = Layout.from_ascii(f"alphabet: {K}\nmax_steps: 40\n@.8.\n..6.\n@...\n")
    tasks = [reach([8], K), Dfa.top(K)]
    for seed in range(20):
        r = rollout(lay, tasks, RandomPolicy(2), gamma=0.9, seed=seed)
        gT = 0.9 ** r.steps
        phi_T = sum(potential(r.final.tasks, i) for i in range(2))
        phi_0 = sum(potential(r.initial.tasks, i) for i in range(2))
        assert sum(r.shaped_returns) == pytest.approx(2 * r.team_return + gT * phi_T - phi_0, abs=1e-12)


def test_trace_replay_and_tamper_detection(tmp_path):
    lay = Layout.from_ascii(f"alphabet: {K}\nmax_steps: 20\n@.8\n@.6\n")
    r = rollout(lay, [reach([8], K), reach([6], K)], RandomPolicy(2), seed=4)
    path = tmp_path / "trace.jsonl"
    write_product_trace(r.trace, path)
    recs = env.read_trace(path)
    assert replay_trace(lay, recs) == []
    recs[-1]["team_reward"] = 1 - recs[-1]["team_reward"]
    assert replay_trace(lay, recs)


def test_markov_continuation_from_snapshot():
    lay = Layout.from_ascii(f"alphabet: {K}\nmax_steps: 30\n@.8\n@.6\n")
    tasks = [reach([8, 6], K), reach([6], K)]
    acts = [(RIGHT, RIGHT), (RIGHT, UP), (DOWN, NOOP), (NOOP, NOOP), (UP, RIGHT)]
    full = rollout(lay, tasks, ScriptedPolicy(acts, 2))
    mid = full.outcomes[1].next
    outs = []
    ps = mid
    for a in acts[2:]:
        if ps.terminal:
            break
        o = product_step(lay, ps, a)
        outs.append((o.team_reward, o.shaped_rewards, o.next.tasks))
        ps = o.next
    expect = [(o.team_reward, o.shaped_rewards, o.next.tasks) for o in full.outcomes[2:2 + len(outs)]]
    assert len(outs) == 3
    assert outs == expect


def test_reward_coherence_exhaustive():
    """The Markov team reward fires exactly when every raw DFA first accepts its labeled prefix."""
    lay = Layout.from_ascii("alphabet: 3\nmax_steps: 4\n@0.\n@12\n")
    tasks = [reach([0, 1], 3), reach_avoid(2, [0], 3)]
    for seq in itertools.product(range(5), repeat=3):
        for seq2 in itertools.product(range(5), repeat=3):
            ps = initial_state(lay, tasks)
            words = [[], []]
            prev_all = False
            for a in zip(seq, seq2):
                if ps.terminal:
                    break
                out = product_step(lay, ps, a)
                for i, lab in enumerate(out.labels):
                    if lab is not None:
                        words[i].append(lab)
                now_all = all(accepts(t, w) for t, w in zip(tasks, words))
                assert out.team_reward == int(now_all and not prev_all)
                prev_all = now_all
                ps = out.next
