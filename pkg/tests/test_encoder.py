import numpy as np

from dfacoop.dfa import Dfa, DfaVector, minimize, progress, reach
from dfacoop.encoder import CanonicalEncoder, TaskCode, encode, encode_vector
from dfacoop.sampling import SamplerConfig, make_rng, sample_multi_agent, sample_rad


def test_code_of_minimized_form():
    a = Dfa(((1, 2), (1, 1), (2, 2)), 0, frozenset({1, 2}))
    assert encode(a) == encode(minimize(a))
    assert encode(Dfa.top(3)) != encode(Dfa.bottom(3))


def test_equality_uses_canonical_bytes_not_digest():
    a = encode(reach([0], 2))
    forged = TaskCode(a.digest, encode(reach([1], 2)).canonical)
    assert forged != a
    assert TaskCode(b"x" * 32, a.canonical) == a


def test_code_shape():
    c = encode(reach([0, 1], 4))
    assert len(c.digest) == 32 and len(c.hex) == 64
    assert c.short(8) == c.hex[:8]
    v = c.vector()
    assert v.shape == (32,) and np.isfinite(v).all()
    assert (c.vector() == v).all()


def test_vector_encoding_is_elementwise_and_equivariant():
    cfg = SamplerConfig(rng_seed=1)
    for i in range(500):
        v = sample_multi_agent(cfg, 3, sample_rad, make_rng(1, i))
        codes = encode_vector(v)
        assert codes == [encode(a) for a in v]
        perm = (2, 0, 1)
        assert encode_vector(v.permuted(perm)) == [codes[p] for p in perm]
    top = encode_vector(DfaVector.top(4, 5))
    assert len(set(top)) == 1


def test_progression_compatibility():
    a = reach([0, 1], 3)
    b = Dfa(((1, 0, 0), (1, 2, 1), (2, 2, 2), (3, 3, 3)), 0, frozenset({2}))
    assert encode(progress(a, [0])) == encode(progress(b, [0]))
    assert encode(progress(a, [0, 1])) == encode(Dfa.top(3))


def test_alternative_backend_protocol():
    class Wrapped(CanonicalEncoder):
        pass

    assert Wrapped().encode(reach([0], 2)) == encode(reach([0], 2))
