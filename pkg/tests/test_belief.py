"""B^p, C^p, and the infection cover."""

import itertools

import pytest

from acklab.belief import bp, cp, cp_bruteforce, event_mass, infection_chain
from acklab.constructions import email_structure

from conftest import complete_info, random_structure


def test_bp_threshold_zero_is_identity(rng):
    s = random_structure(rng, n_states=2, n_types=(2, 2))
    support = list(s.support)
    for size in (1, 3, len(support)):
        event = frozenset(support[:size])
        assert bp(s, event, 0) == event


def test_bp_full_support_fixed_for_all_p(rng):
    s = random_structure(rng, n_states=2, n_types=(3, 2))
    event = frozenset(s.support)
    for p in (0.3, 0.9, 1.0):
        assert bp(s, event, p) == event


def test_email_chain_bp_strictly_shrinks_one_rung():
    chain, _ = email_structure(3, 0.5, (0.3, 0.7))
    support = frozenset(chain.support)
    # drop the θ_b point: the chain types that lean on it lose confidence
    theta_b = next(k for k in support if chain.states[k[0]] == "b")
    event = support - {theta_b}
    # rung-0 types believe the θ_b point heavily: p just above their
    # continuation belief removes exactly the adjacent rung
    shrunk = bp(chain, event, 0.9)
    assert shrunk < event
    assert len(event - shrunk) >= 1


def test_cp_complete_information_full():
    s = complete_info(states=("s0", "s1"), mu=(0.5, 0.5))
    event = frozenset(s.support)
    assert cp(s, event, 1.0) == event


def test_cp_matches_bruteforce_oracle(rng):
    for _ in range(8):
        s = random_structure(rng, n_states=2, n_types=(2, 2), density=0.8)
        support = list(s.support)
        for event in itertools.chain.from_iterable(
                itertools.combinations(support, r) for r in (1, 2, len(support))):
            ev = frozenset(event)
            for p in (0.0, 0.4, 0.8, 1.0):
                assert cp(s, ev, p) == cp_bruteforce(s, ev, p)


def test_bp_monotone_in_event_and_p(rng):
    for _ in range(6):
        s = random_structure(rng, n_states=2, n_types=(2, 2), density=0.9)
        support = list(s.support)
        small = frozenset(support[: max(1, len(support) // 2)])
        big = frozenset(support)
        for p, q in ((0.2, 0.7), (0.0, 1.0)):
            assert bp(s, small, p) <= bp(s, big, p)
            assert bp(s, big, q) <= bp(s, big, p) or q <= p
            assert cp(s, small, p) <= cp(s, big, p)
            assert cp(s, big, max(p, q)) <= cp(s, big, min(p, q))


def test_infection_chain_monotone_cover():
    chain, _ = email_structure(4, 0.5, (0.3, 0.7))
    support = list(chain.support)
    # seed: the bottom of the chain (the θ_b point and the first rung)
    seed = frozenset(k for k in support
                     if chain.states[k[0]] == "b")
    chain_events = infection_chain(chain, seed, 0.2)
    for a, b in zip(chain_events, chain_events[1:]):
        assert a < b  # strictly growing until stabilization
    assert chain_events[-1] == frozenset(support)  # full infection
    # one-rung-at-a-time growth after the first step
    sizes = [len(ev) for ev in chain_events]
    assert sizes[0] < sizes[1]


def test_infection_chain_degenerate_seeds(rng):
    s = random_structure(rng, n_states=2, n_types=(2, 2))
    support = frozenset(s.support)
    # full seed stays full: B^{1-eps} of the empty complement is empty
    out = infection_chain(s, support, 0.3)
    assert out[-1] == support and len(out) == 1
    # empty seed stays empty: the whole support is common (1-eps) belief of itself
    out = infection_chain(s, frozenset(), 0.3)
    assert out[-1] == frozenset() and len(out) == 1


def test_infection_union_is_complement_of_cp():
    chain, _ = email_structure(3, 0.6, (0.25, 0.75))
    support = frozenset(chain.support)
    seed = frozenset(k for k in support if chain.states[k[0]] == "b")
    eps = 0.3
    out = infection_chain(chain, seed, eps)
    safe = cp(chain, support - seed, 1 - eps)
    assert out[-1] == support - safe


def test_event_mass(rng):
    s = random_structure(rng, n_states=2, n_types=(2, 2))
    assert float(event_mass(s, frozenset(s.support))) == pytest.approx(1.0)
