"""Common p-belief operators and the infection cover.

Events are frozensets of support keys ``(state_idx, profile)`` of a single
structure.  Beliefs are evaluated with the structure's exact interim
conditionals; thresshold comparisons are exact in rational mode and allow a
1e-12 slack in float mode (the operator's fixed point is threshold-sensitive).
"""

from __future__ import annotations

from . import numerics as nm
from .errors import ValidationError


def project_event(event, i):
    """E_{-i}: the (θ, τ_{-i}) pairs appearing in the event."""
    return {(th, prof[:i] + prof[i + 1:]) for th, prof in event}


def bp(structure, event, p, conjoin_truth=True):
    """B^p(E): the states in E where every player p-believes E's projection.

    With `conjoin_truth` (the operator as defined), the result is a subset
    of E.  The belief-only variant (no restriction to E) is exposed behind
    the flag for experimentation; nothing in the distance machinery uses it.
    """
    event = frozenset(event)
    support = set(structure.support)
    if not event <= support:
        raise ValidationError(["event contains points outside the support"])
    projections = [project_event(event, i) for i in range(structure.players)]
    candidates = event if conjoin_truth else support
    keep = set()
    for key in candidates:
        th, prof = key
        ok = True
        for i in range(structure.players):
            belief = structure.zero()
            for bkey, v in structure.interim(i, prof[i]).items():
                if bkey in projections[i]:
                    belief += v
            if not nm.ge(belief, p, 1e-12):
                ok = False
                break
        if ok:
            keep.add(key)
    return frozenset(keep)


def cp(structure, event, p):
    """C^p(E): iterate B^p to its fixed point (≤ |E| iterations)."""
    cur = frozenset(event)
    while True:
        nxt = bp(structure, cur, p)
        if nxt == cur:
            return cur
        cur = nxt


def cp_bruteforce(structure, event, p):
    """Oracle: ⋂_m [B^p]^m(E) computed naively, for equivalence tests."""
    out = frozenset(structure.support)
    stage = frozenset(event)
    for _ in range(len(event) + 1):
        stage = bp(structure, stage, p)
        out = out & stage
    return out


def infection_chain(structure, d0, eps):
    """The growing cover D^0 ⊆ D^1 ⊆ … of the complement of C^{1-ε}(supp∖D^0).

    Each step infects the points some player of which assigns more than ε
    to already-infected opponents:

        D^n = supp(P) ∖ B^{1-ε}(supp(P) ∖ D^{n-1}).

    Stabilizes within |supp| steps; the union of the chain is exactly
    supp ∖ C^{1-ε}(supp ∖ D^0).
    """
    support = frozenset(structure.support)
    d0 = frozenset(d0)
    if not d0 <= support:
        raise ValidationError(["seed event outside the support"])
    chain = [d0]
    cur = d0
    for _ in range(len(support) + 1):
        nxt = support - bp(structure, support - cur, 1 - eps)
        if nxt == cur:
            break
        chain.append(nxt)
        cur = nxt
    return chain


def event_mass(structure, event):
    total = structure.zero()
    for key in event:
        total += structure.mass[key]
    return total
