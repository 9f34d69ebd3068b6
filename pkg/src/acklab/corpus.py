"""Bundled instances: classic games, belief structures, and demo inputs.

Every entry is emitted as schema-conformant JSON with deterministic bytes
for a fixed version tag.  The Hellman entry carries the belief structure
only; the cited payoff matrix is an external input by design.
"""

from __future__ import annotations

from fractions import Fraction as F

from .constructions import email_structure
from .core import game_to_dict, make_game, structure_to_dict, validate_structure
from .errors import UnknownCorpusEntry

VERSION = "1"


def hellman_structure(exact=True):
    """Two first-order beliefs per player over four payoff states.

    Player A's conditional given signal y puts 1/2 on (A, y) and 1/4 on each
    of (B, ±1); symmetrically for player B.  The joint below reproduces those
    conditionals exactly under a uniform prior.
    """
    states = ["A+1", "A-1", "B+1", "B-1"]
    mu = [F(1, 4)] * 4
    types = [["y-", "y+"], ["y-", "y+"]]
    e = F(1, 8)
    entries = {
        ("A+1", ("y+", "y-")): e, ("A+1", ("y+", "y+")): e,
        ("A-1", ("y-", "y-")): e, ("A-1", ("y-", "y+")): e,
        ("B+1", ("y-", "y+")): e, ("B+1", ("y+", "y+")): e,
        ("B-1", ("y-", "y-")): e, ("B-1", ("y+", "y-")): e,
    }
    if not exact:
        mu = [float(v) for v in mu]
        entries = {k: float(v) for k, v in entries.items()}
    return validate_structure((states, mu, types, entries), exact=exact,
                              name="hellman-structure")


def hellman_coin_rule():
    """The type-independent coin rule: correlate on matching/opposing actions.

    Rows are serialized per (state, type profile); actions L/R per player.
    """
    rows = []
    half = "0.5"
    for state in ["A+1", "B+1"]:
        for prof in (("y-", "y-"), ("y-", "y+"), ("y+", "y-"), ("y+", "y+")):
            rows.append({"state": state, "profile": list(prof),
                         "actions": {"L,L": half, "R,R": half}})
    for state in ["A-1", "B-1"]:
        for prof in (("y-", "y-"), ("y-", "y+"), ("y+", "y-"), ("y+", "y+")):
            rows.append({"state": state, "profile": list(prof),
                         "actions": {"L,R": half, "R,L": half}})
    return {"format": "acklab/1", "kind": "rule", "name": "hellman-coin-rule",
            "action_labels": [["L", "R"], ["L", "R"]], "rows": rows}


def complete_info_structure(states=("s",), mu=(1.0,), exact=False):
    entries = {(s, ("t", "t")): m for s, m in zip(states, mu)}
    return validate_structure((list(states), list(mu), [["t"], ["t"]], entries),
                              exact=exact, name="complete-info")


def matching_pennies():
    def u(i, aprof, th):
        match = 1 if aprof[0] == aprof[1] else -1
        return match if i == 0 else -match
    return make_game([["H", "T"], ["H", "T"]], ["s"], u, bound=1,
                     name="matching-pennies")


def prisoners_dilemma():
    table = {(0, 0): 3, (1, 0): 4, (0, 1): 0, (1, 1): 1}

    def u(i, aprof, th):
        return table[(aprof[i], aprof[1 - i])]
    return make_game([["C", "D"], ["C", "D"]], ["s"], u, bound=4,
                     name="prisoners-dilemma")


def coordination_game(high=2, low=1):
    def u(i, aprof, th):
        if aprof[0] == aprof[1]:
            return high if aprof[0] == 0 else low
        return 0
    return make_game([["A", "B"], ["A", "B"]], ["s"], u, bound=max(high, low),
                     name="coordination")


def binary_coordination_2state():
    """Two-state coordination: matching pays 2 in the state named by the action."""
    def u(i, aprof, th):
        if aprof[0] != aprof[1]:
            return 0
        return 2 if aprof[0] == th else 1
    return make_game([["A", "B"], ["A", "B"]], ["s0", "s1"], u, bound=2,
                     name="coordination-2state")


def persuasion_instance(k=0):
    """2-state sender/receiver-style instances used by the design sweeps.

    Player 0 is the informed side (its types vary with the structure under
    design); player 1 is a dummy.  The designer objective rewards action a1
    in state s1 and penalizes it in s0, with instance-specific intensities.
    """
    mult = [(3, 1), (2, 1), (4, 3)][k % 3]

    def u(i, aprof, th):
        if i == 1:
            return 0
        act = aprof[0]
        if act == 1:
            return mult[0] if th == 1 else -mult[1]
        return 0
    game = make_game([["a0", "a1"], ["pass"]], ["s0", "s1"], u,
                     name=f"persuasion-{k}")
    designer = {}
    for aprof in game.profiles():
        for th in range(2):
            designer[(aprof, th)] = 1.0 if aprof[0] == 1 else 0.0
    return game, designer


_EMAIL_MU = (0.12, 0.88)


def _entries():
    reg = {
        "hellman-structure": lambda: structure_to_dict(hellman_structure()),
        "hellman-coin-rule": hellman_coin_rule,
        "matching-pennies": lambda: game_to_dict(matching_pennies()),
        "prisoners-dilemma": lambda: game_to_dict(prisoners_dilemma()),
        "coordination": lambda: game_to_dict(coordination_game()),
        "coordination-2state": lambda: game_to_dict(binary_coordination_2state()),
        "complete-info": lambda: structure_to_dict(complete_info_structure()),
    }
    return reg


def corpus_list():
    names = sorted(_entries()) + ["email-N (chain, e.g. email-5)",
                                  "email-N-ck (companion)"]
    return {"format": "acklab/1", "kind": "corpus-manifest",
            "version": VERSION, "entries": names}


def corpus_emit(name):
    reg = _entries()
    if name in reg:
        payload = reg[name]()
        payload.setdefault("corpus_version", VERSION)
        return payload
    if name.startswith("email-"):
        rest = name[len("email-"):]
        companion = rest.endswith("-ck")
        if companion:
            rest = rest[:-3]
        try:
            n = int(rest)
        except ValueError as exc:
            raise UnknownCorpusEntry(name) from exc
        q = 1 - 1 / (20 * n)
        chain, ck = email_structure(n, q, _EMAIL_MU)
        payload = structure_to_dict(ck if companion else chain)
        payload["corpus_version"] = VERSION
        return payload
    raise UnknownCorpusEntry(name)
