"""Ex-ante distance bisections: identity, symmetry, orderings, monotone feasibility."""

import pytest

from acklab.ack import (
    AckParams,
    ack_distance,
    dfg_distance,
    feasibility_probe,
    weak_exante_distance,
)
from acklab.constructions import email_structure, quantize_simple
from acklab.errors import ValidationError
from acklab.metric import MetricContext

from conftest import random_structure


def test_identity_distance_is_tail_sized(rng):
    s = random_structure(rng, n_states=2, n_types=(2, 2))
    params = AckParams(m_max=8, tol=1e-3)
    tail = float(MetricContext([s, s], depth=8).tail())
    for fn in (ack_distance, weak_exante_distance):
        res = fn(s, s, params)
        assert float(res.lower) == 0.0
        assert float(res.upper) <= tail + params.tol + 1e-9
    res = dfg_distance(s, s, params)
    assert float(res.lower) == 0.0
    assert float(res.upper) <= tail ** 0.5 + params.tol + 1e-9  # g(ε)=ε² scale


def test_symmetry_exact(rng):
    a = random_structure(rng, n_states=2, n_types=(2, 2), mu=(0.4, 0.6))
    b = random_structure(rng, n_states=2, n_types=(2, 2), mu=(0.4, 0.6))
    params = AckParams(m_max=6, tol=1e-3)
    r1 = ack_distance(a, b, params)
    r2 = ack_distance(b, a, params)
    assert float(r1.lower) == float(r2.lower)
    assert float(r1.upper) == float(r2.upper)


def test_weak_never_exceeds_ack(rng):
    params = AckParams(m_max=6, tol=1e-3)
    for _ in range(4):
        a = random_structure(rng, n_states=2, n_types=(2, 2), mu=(0.5, 0.5))
        b = random_structure(rng, n_states=2, n_types=(2, 2), mu=(0.5, 0.5))
        ares = ack_distance(a, b, params)
        wres = weak_exante_distance(a, b, params)
        # true d' <= true d_ACK, so the brackets must be compatible
        assert float(wres.lower) <= float(ares.upper) + 1e-9


def test_feasibility_monotone_on_grid(rng):
    a = random_structure(rng, n_states=2, n_types=(2, 2), mu=(0.3, 0.7))
    b = random_structure(rng, n_states=2, n_types=(2, 2), mu=(0.3, 0.7))
    params = AckParams(m_max=6)
    seen_true = False
    for k in range(50):
        eps = 0.02 + k * (1.6 / 50)
        opt, pess, _ = feasibility_probe(a, b, eps, params)
        if seen_true:
            assert opt  # optimistic feasibility never flips back off
        if pess:
            seen_true = True


def test_requires_shared_state_space(rng):
    a = random_structure(rng, n_states=2, n_types=(2, 2))
    b = random_structure(rng, n_states=3, n_types=(2, 2))
    with pytest.raises(ValidationError):
        ack_distance(a, b, AckParams())


def test_dfg_zero_implies_equal_supports(rng):
    # contrapositive check on a pair with different supports
    a = random_structure(rng, n_states=2, n_types=(2, 2), density=0.7, mu=(0.5, 0.5))
    b = random_structure(rng, n_states=2, n_types=(2, 2), density=0.7, mu=(0.5, 0.5))
    if set(a.mass) == set(b.mass):
        return
    res = dfg_distance(a, b, AckParams(m_max=6, tol=1e-3))
    assert float(res.upper) > 0


def test_quantization_sequence_topology_agreement(rng):
    # d_ACK -> 0 iff d^{f,g} -> 0 along a quantization sequence
    s = random_structure(rng, n_states=2, n_types=(3, 3))
    params = AckParams(m_max=8, tol=1e-3)
    prev_ack, prev_dfg = None, None
    for delta in (0.4, 0.2, 0.1):
        qs, _ = quantize_simple(s, delta)
        ares = ack_distance(s, qs, params)
        dres = dfg_distance(s, qs, params)
        assert float(ares.upper) < delta + delta / 10 + params.tol
        assert float(dres.upper) < 1.0
        prev_ack, prev_dfg = float(ares.upper), float(dres.upper)
    assert prev_ack < 0.2 and prev_dfg < 0.5


def test_email_gap_weak_small_ack_large():
    chain, ck = email_structure(10, 1 - 1 / 200, (0.12, 0.88))
    params = AckParams(m_max=8, tol=2e-3)
    wres = weak_exante_distance(chain, ck, params)
    opt, _, _ = feasibility_probe(chain, ck, 0.1, params)
    assert float(wres.upper) < 0.05
    assert not opt  # certified d_ACK > 0.1
