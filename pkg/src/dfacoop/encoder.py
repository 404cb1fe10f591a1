"""Task codes: fixed-length identifiers equal exactly when minimized DFAs coincide.

The canonical backend hashes the canonical serialization of the minimized
DFA and keeps the bytes themselves, so equality checks are exact rather than
probabilistic. Any object with ``encode(dfa) -> TaskCode`` can stand in for
it, e.g. a learned encoder.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Protocol, Sequence

import numpy as np

from .dfa import Dfa, canonical_bytes

DIGEST_BYTES = 32
EXPANSION_DIM = 32
_PROJECTION_SEED = 0x7A5C


@dataclass(frozen=True)
class TaskCode:
    digest: bytes
    canonical: bytes = field(repr=False)

    def __eq__(self, other):
        if not isinstance(other, TaskCode):
            return NotImplemented
        return self.canonical == other.canonical

    def __hash__(self):
        return hash(self.digest)

    @property
    def hex(self) -> str:
        return self.digest.hex()

    def short(self, n: int = 12) -> str:
        return self.digest.hex()[:n]

    def vector(self, dim: int = EXPANSION_DIM) -> np.ndarray:
        """Fixed pseudo-random projection of the digest bits to ``dim`` reals.

        Only a fixed-width numeric view; distances carry no task semantics.
        """
        bits = np.unpackbits(np.frombuffer(self.digest, dtype=np.uint8)).astype(np.float64)
        return _projection(dim) @ (2.0 * bits - 1.0)


@lru_cache(maxsize=8)
def _projection(dim: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(_PROJECTION_SEED))
    return rng.standard_normal((dim, 8 * DIGEST_BYTES)) / np.sqrt(8 * DIGEST_BYTES)


class Encoder(Protocol):
    def encode(self, a: Dfa) -> TaskCode: ...


class CanonicalEncoder:
    """SHA-256 of the canonical minimal form, canonical bytes retained."""

    def encode(self, a: Dfa) -> TaskCode:
        return _encode_cached(a)

    def encode_vector(self, v: Sequence[Dfa]) -> list:
        return [self.encode(a) for a in v]


@lru_cache(maxsize=1 << 15)
def _encode_cached(a: Dfa) -> TaskCode:
    data = canonical_bytes(a)
    return TaskCode(hashlib.sha256(data).digest(), data)


DEFAULT_ENCODER = CanonicalEncoder()


def encode(a: Dfa) -> TaskCode:
    return DEFAULT_ENCODER.encode(a)


def encode_vector(v: Sequence[Dfa]) -> list:
    return DEFAULT_ENCODER.encode_vector(v)
