"""Immutable DFAs over integer token alphabets.

Symbols are the integers ``0 .. alphabet_size - 1``. Transitions are stored as
a tuple of rows, one row per state, so a ``Dfa`` is hashable and cheap to
compare. Equality is structural; use :func:`language_equivalent` for language
equality.

Minimization is Moore-style naive partition refinement followed by a
canonical breadth-first relabeling, so two DFAs accept the same language
exactly when their minimized forms serialize to the same bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Sequence

from .errors import AlphabetMismatchError, InvalidDfaError, InvalidSymbolError

Row = tuple[int, ...]


@dataclass(frozen=True)
class Dfa:
    transitions: tuple[Row, ...]
    initial: int = 0
    accepting: frozenset[int] = frozenset()
    # set only by minimize(); lets repeated minimization short-circuit
    _minimal: bool = field(default=False, compare=False, repr=False)

    def __post_init__(self):
        rows = tuple(tuple(int(t) for t in row) for row in self.transitions)
        object.__setattr__(self, "transitions", rows)
        object.__setattr__(self, "accepting", frozenset(int(q) for q in self.accepting))
        n = len(rows)
        if n == 0:
            raise InvalidDfaError("a DFA needs at least one state")
        k = len(rows[0])
        if k == 0:
            raise InvalidDfaError("alphabet must be non-empty")
        for q, row in enumerate(rows):
            if len(row) != k:
                raise InvalidDfaError(f"state {q} has {len(row)} transitions, expected {k}")
            for t in row:
                if not 0 <= t < n:
                    raise InvalidDfaError(f"transition from state {q} targets missing state {t}")
        if not 0 <= self.initial < n:
            raise InvalidDfaError(f"initial state {self.initial} out of range")
        if any(not 0 <= q < n for q in self.accepting):
            raise InvalidDfaError("accepting set refers to missing states")

    @classmethod
    def _trusted(cls, transitions, initial, accepting, minimal=False) -> "Dfa":
        # skips validation; callers guarantee well-formedness
        obj = object.__new__(cls)
        object.__setattr__(obj, "transitions", transitions)
        object.__setattr__(obj, "initial", initial)
        object.__setattr__(obj, "accepting", accepting)
        object.__setattr__(obj, "_minimal", minimal)
        return obj

    @property
    def num_states(self) -> int:
        return len(self.transitions)

    @property
    def alphabet_size(self) -> int:
        return len(self.transitions[0])

    @classmethod
    def top(cls, alphabet_size: int) -> "Dfa":
        """The single-state accepting DFA."""
        return minimize(cls(((0,) * alphabet_size,), 0, frozenset({0})))

    @classmethod
    def bottom(cls, alphabet_size: int) -> "Dfa":
        """The single-state rejecting DFA."""
        return minimize(cls(((0,) * alphabet_size,), 0, frozenset()))

    # -- serialization ----------------------------------------------------

    def to_bytes(self) -> bytes:
        """Flat encoding: state count, alphabet size, transition table, accepting bitmask.

        The initial state is not stored, so only DFAs rooted at state 0 (every
        minimized DFA) round-trip through this format.
        """
        if self.initial != 0:
            raise InvalidDfaError("byte serialization requires the initial state to be 0")
        n, k = self.num_states, self.alphabet_size
        flat = [t for row in self.transitions for t in row]
        mask = sum(1 << q for q in self.accepting)
        return (
            struct.pack("<II", n, k)
            + struct.pack(f"<{n * k}I", *flat)
            + mask.to_bytes((n + 7) // 8, "little")
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Dfa":
        n, k = struct.unpack_from("<II", data, 0)
        flat = struct.unpack_from(f"<{n * k}I", data, 8)
        mask = int.from_bytes(data[8 + 4 * n * k:], "little")
        rows = tuple(tuple(flat[q * k:(q + 1) * k]) for q in range(n))
        return cls(rows, 0, frozenset(q for q in range(n) if mask >> q & 1))

    def to_hex(self) -> str:
        return self.to_bytes().hex()

    @classmethod
    def from_hex(cls, text: str) -> "Dfa":
        return cls.from_bytes(bytes.fromhex(text.strip()))

    def to_dict(self) -> dict:
        return {
            "states": self.num_states,
            "alphabet": self.alphabet_size,
            "initial": self.initial,
            "accepting": sorted(self.accepting),
            "transitions": [
                [q, s, t] for q, row in enumerate(self.transitions) for s, t in enumerate(row)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict, alphabet_size: Optional[int] = None) -> "Dfa":
        try:
            n, k = int(doc["states"]), int(doc["alphabet"])
            table: list[list[Optional[int]]] = [[None] * k for _ in range(n)]
            for q, s, t in doc["transitions"]:
                if not (0 <= q < n and 0 <= s < k):
                    raise InvalidDfaError(f"transition [{q}, {s}, {t}] out of range")
                table[q][s] = int(t)
            initial = int(doc["initial"])
            accepting = frozenset(int(q) for q in doc["accepting"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidDfaError):
                raise
            raise InvalidDfaError(f"malformed DFA document: {exc}") from exc
        for q, row in enumerate(table):
            if None in row:
                raise InvalidDfaError(f"transition table is not total at state {q}")
        if alphabet_size is not None and k != alphabet_size:
            raise AlphabetMismatchError(f"DFA alphabet {k} != expected {alphabet_size}")
        return cls(tuple(tuple(row) for row in table), initial, accepting)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str, alphabet_size: Optional[int] = None) -> "Dfa":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidDfaError(f"DFA document is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, alphabet_size)


def _check_range(symbol: int, alphabet_size: int) -> None:
    if not 0 <= symbol < alphabet_size:
        raise InvalidSymbolError(f"symbol {symbol} outside alphabet of size {alphabet_size}")


def _check_symbol(a: Dfa, symbol: int) -> None:
    _check_range(symbol, a.alphabet_size)


def minimize(a: Dfa) -> Dfa:
    """Return the minimal DFA for ``L(a)`` in canonical BFS numbering.

    Unreachable states are dropped first; the remaining states are split by
    (block, successor blocks) signatures until the block count stops growing.
    """
    if a._minimal:
        return a
    trans = a.transitions

    index = {a.initial: 0}
    order = [a.initial]
    for q in order:
        for t in trans[q]:
            if t not in index:
                index[t] = len(order)
                order.append(t)
    m = len(order)
    get = index.__getitem__
    rows = [tuple(map(get, trans[q])) for q in order]
    acc_in = a.accepting
    is_acc = [q in acc_in for q in order]

    block = [int(x) for x in is_acc]
    count = 2 if 0 < sum(block) < m else 1
    while count < m:
        sigs: dict = {}
        new = []
        bget = block.__getitem__
        for q in range(m):
            sig = (block[q], *map(bget, rows[q]))
            b = sigs.get(sig)
            if b is None:
                b = sigs[sig] = len(sigs)
            new.append(b)
        block = new
        if len(sigs) == count:
            break
        count = len(sigs)

    if count == m:
        # already minimal; only the BFS relabeling from index 0 remains
        out = tuple(rows)
        acc = frozenset(q for q in range(m) if is_acc[q])
        return Dfa._trusted(out, 0, acc, True)

    rep: dict[int, int] = {}
    for q in range(m):
        rep.setdefault(block[q], q)
    label = {block[0]: 0}
    queue = [block[0]]
    for b0 in queue:
        for t in rows[rep[b0]]:
            b = block[t]
            if b not in label:
                label[b] = len(queue)
                queue.append(b)
    out = tuple(tuple(label[block[t]] for t in rows[rep[b]]) for b in queue)
    acc = frozenset(label[block[q]] for q in range(m) if is_acc[q])
    return Dfa._trusted(out, 0, acc, True)


def renumber_minimal(a: Dfa) -> Dfa:
    """BFS renumbering of a DFA the caller knows to be minimal; no refinement."""
    trans = a.transitions
    index = {a.initial: 0}
    order = [a.initial]
    for q in order:
        for t in trans[q]:
            if t not in index:
                index[t] = len(order)
                order.append(t)
    get = index.__getitem__
    rows = tuple(tuple(map(get, trans[q])) for q in order)
    acc = frozenset(index[q] for q in a.accepting if q in index)
    return Dfa._trusted(rows, 0, acc, True)


@lru_cache(maxsize=1 << 16)
def _step_minimal(a: Dfa, symbol: int) -> Dfa:
    target = a.transitions[0][symbol]
    if target == 0:
        return a
    return minimize(Dfa._trusted(a.transitions, target, a.accepting))


def step(a: Dfa, symbol: int) -> Dfa:
    """Advance the initial state by one symbol and minimize."""
    _check_symbol(a, symbol)
    return _step_minimal(minimize(a), symbol)


def progress(a: Dfa, word: Iterable[int]) -> Dfa:
    """The remaining task after reading ``word``: ``a / word``."""
    out = minimize(a)
    for symbol in word:
        _check_symbol(out, symbol)
        out = _step_minimal(out, symbol)
    return out


def run(a: Dfa, word: Iterable[int]) -> int:
    """Extended transition function from the initial state, no minimization."""
    q = a.initial
    for symbol in word:
        _check_symbol(a, symbol)
        q = a.transitions[q][symbol]
    return q


def accepts(a: Dfa, word: Iterable[int]) -> bool:
    return run(a, word) in a.accepting


def is_plan(a: Dfa) -> bool:
    """True when every accepting state is a sink."""
    return all(all(t == q for t in a.transitions[q]) for q in a.accepting)


def is_trivial_accepting(a: Dfa) -> bool:
    m = minimize(a)
    return m.num_states == 1 and 0 in m.accepting


def is_trivial_rejecting(a: Dfa) -> bool:
    m = minimize(a)
    return m.num_states == 1 and not m.accepting


def is_trivial(a: Dfa) -> bool:
    return minimize(a).num_states == 1


def canonical_bytes(a: Dfa) -> bytes:
    return minimize(a).to_bytes()


def language_equivalent(a: Dfa, b: Dfa) -> bool:
    return canonical_bytes(a) == canonical_bytes(b)


def sink_accepting(a: Dfa) -> Dfa:
    """Redirect every transition out of an accepting state back to itself."""
    k = a.alphabet_size
    rows = tuple(
        (q,) * k if q in a.accepting else row for q, row in enumerate(a.transitions)
    )
    return Dfa._trusted(rows, a.initial, a.accepting)


def chain(steps: Sequence[tuple[Iterable[int], Iterable[int]]], alphabet_size: int, validate: bool = True) -> Dfa:
    """Build a sequence of one-step reach(-avoid) problems.

    ``steps[i] = (reach, avoid)``: from chain state ``i`` any symbol in ``reach``
    advances to ``i + 1`` and any symbol in ``avoid`` falls into a rejecting
    sink; every other symbol stutters. State ``len(steps)`` is the accepting
    sink. The rejecting sink is only added when some step avoids something.
    The result is not minimized. ``validate=False`` skips the symbol checks
    for callers that build steps from in-range symbols.
    """
    n = len(steps)
    if n == 0:
        raise InvalidDfaError("a chain needs at least one step")
    need_reject = any(list(avoid) for _, avoid in steps)
    reject = n + 1
    rows = []
    for i, (reach, avoid) in enumerate(steps):
        row = [i] * alphabet_size
        for s in avoid:
            if validate:
                _check_range(s, alphabet_size)
            row[s] = reject
        for s in reach:
            if validate:
                _check_range(s, alphabet_size)
                if row[s] == reject:
                    raise InvalidDfaError(f"symbol {s} both reached and avoided at step {i}")
            row[s] = i + 1
        rows.append(tuple(row))
    rows.append((n,) * alphabet_size)
    if need_reject:
        rows.append((reject,) * alphabet_size)
    return Dfa._trusted(tuple(rows), 0, frozenset({n}))


def reach(tokens: Sequence[int], alphabet_size: int) -> Dfa:
    """Minimal DFA for "reach tokens[0], then tokens[1], ..."."""
    return minimize(chain([((t,), ()) for t in tokens], alphabet_size))


def reach_avoid(goal: int, avoid: Iterable[int], alphabet_size: int) -> Dfa:
    """Minimal DFA for "reach ``goal`` while avoiding ``avoid``"."""
    return minimize(chain([((goal,), tuple(avoid))], alphabet_size))


class DfaVector(tuple):
    """One DFA per agent, all over the same alphabet."""

    def __new__(cls, entries: Iterable[Dfa]):
        entries = tuple(entries)
        if not entries:
            raise InvalidDfaError("a DFA vector needs at least one entry")
        k = entries[0].alphabet_size
        for e in entries:
            if e.alphabet_size != k:
                raise AlphabetMismatchError("DFA vector entries must share one alphabet")
        return super().__new__(cls, entries)

    @classmethod
    def top(cls, n: int, alphabet_size: int) -> "DfaVector":
        return cls([Dfa.top(alphabet_size)] * n)

    @property
    def alphabet_size(self) -> int:
        return self[0].alphabet_size

    @property
    def all_accepting(self) -> bool:
        return all(is_trivial_accepting(e) for e in self)

    @property
    def all_trivial(self) -> bool:
        """Every entry trivially accepting or trivially rejecting."""
        return all(is_trivial(e) for e in self)

    def minimized(self) -> "DfaVector":
        return DfaVector(minimize(e) for e in self)

    def permuted(self, perm: Sequence[int]) -> "DfaVector":
        """Agent ``i`` receives entry ``perm[i]``."""
        return DfaVector(self[p] for p in perm)

    def __repr__(self):
        return f"DfaVector({list(self)!r})"


def progress_vector(v: DfaVector, symbols: Sequence[Optional[int]]) -> DfaVector:
    """Element-wise progression; ``None`` leaves that agent's entry as it is."""
    if len(symbols) != len(v):
        raise InvalidSymbolError(f"expected {len(v)} symbols, got {len(symbols)}")
    return DfaVector(
        minimize(a) if s is None else step(a, s) for a, s in zip(v, symbols)
    )
