"""Reference implementations used only by the tests.

Each oracle is written from the definitions, without calling the package's
minimizer, progression or product code.
"""

from __future__ import annotations

import itertools

import numpy as np


def random_table(rng: np.random.Generator, max_states: int = 10, max_alphabet: int = 6):
    """(transitions array [n, k], initial, accepting bool array)."""
    n = int(rng.integers(1, max_states + 1))
    k = int(rng.integers(1, max_alphabet + 1))
    trans = rng.integers(0, n, size=(n, k))
    acc = rng.random(n) < 0.4
    init = int(rng.integers(0, n))
    return trans, init, acc


def reachable(trans: np.ndarray, init: int) -> list:
    seen = {init}
    frontier = [init]
    while frontier:
        q = frontier.pop()
        for t in trans[q]:
            t = int(t)
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    return sorted(seen)


def table_filling_size(trans: np.ndarray, init: int, acc: np.ndarray) -> int:
    """Minimal state count by the pairwise distinguishability table."""
    states = reachable(trans, init)
    pos = {q: i for i, q in enumerate(states)}
    m = len(states)
    dist = np.zeros((m, m), dtype=bool)
    for i, j in itertools.combinations(range(m), 2):
        dist[i, j] = dist[j, i] = acc[states[i]] != acc[states[j]]
    changed = True
    while changed:
        changed = False
        for i, j in itertools.combinations(range(m), 2):
            if dist[i, j]:
                continue
            for s in range(trans.shape[1]):
                a, b = pos[int(trans[states[i], s])], pos[int(trans[states[j], s])]
                if dist[a, b]:
                    dist[i, j] = dist[j, i] = True
                    changed = True
                    break
    # count equivalence classes: each state joins the class of its first indistinguishable predecessor
    classes = 0
    for i in range(m):
        if not any(not dist[i, j] for j in range(i)):
            classes += 1
    return classes


def random_words(rng: np.random.Generator, k: int, count: int, max_len: int):
    """Padded symbol matrix [count, max_len] and a length vector."""
    lengths = rng.integers(0, max_len + 1, size=count)
    words = rng.integers(0, k, size=(count, max_len))
    return words, lengths


def simulate(trans: np.ndarray, init: int, acc: np.ndarray, words: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Vectorized acceptance of many words at once."""
    q = np.full(len(words), init)
    for t in range(words.shape[1]):
        live = t < lengths
        q = np.where(live, trans[q, words[:, t]], q)
    return acc[q]


def product_equivalent(t1, i1, a1, t2, i2, a2) -> bool:
    """Language equality by search of the synchronous product for a distinguishing pair."""
    seen = {(i1, i2)}
    frontier = [(i1, i2)]
    while frontier:
        p, q = frontier.pop()
        if bool(a1[p]) != bool(a2[q]):
            return False
        for s in range(t1.shape[1]):
            nxt = (int(t1[p, s]), int(t2[q, s]))
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return True


def as_arrays(dfa):
    """Package DFA -> (transitions array, initial, accepting bool array)."""
    trans = np.array(dfa.transitions, dtype=np.int64).reshape(dfa.num_states, dfa.alphabet_size)
    acc = np.zeros(dfa.num_states, dtype=bool)
    acc[list(dfa.accepting)] = True
    return trans, dfa.initial, acc


def is_plan_array(trans: np.ndarray, acc: np.ndarray) -> bool:
    return all(bool((trans[q] == q).all()) for q in np.flatnonzero(acc))


def run_word(trans: np.ndarray, init: int, word) -> int:
    q = init
    for s in word:
        q = int(trans[q, s])
    return q
