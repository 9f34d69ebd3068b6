"""Shared generators for seeded random instances."""

import numpy as np
import pytest

from acklab.core import make_game, validate_structure


def random_structure(rng, n_states=2, n_types=(2, 2), density=1.0, mu=None,
                     states=None, name=""):
    """A random full-support-prior structure; `density` thins the support.

    With `mu` given, the marginal over states is exactly that prior (so two
    structures drawn with the same `mu` are distance-comparable).
    """
    states = list(states) if states else [f"s{k}" for k in range(n_states)]
    n_states = len(states)
    types = [[f"p{i}t{k}" for k in range(n_types[i])] for i in range(len(n_types))]
    while True:
        raw = rng.uniform(0.05, 1.0, size=(n_states,) + tuple(n_types))
        if density < 1.0:
            mask = rng.uniform(size=raw.shape) < density
            raw = raw * mask
        state_tot = raw.sum(axis=tuple(range(1, raw.ndim)))
        if (state_tot <= 1e-9).any():
            continue
        if mu is not None:
            raw = raw * (np.asarray(mu) / state_tot).reshape((n_states,) + (1,) * len(n_types))
        else:
            raw = raw / raw.sum()
        ok = True
        for i in range(len(n_types)):
            axes = tuple(k for k in range(raw.ndim) if k != i + 1)
            if (raw.sum(axis=axes) <= 1e-9).any():
                ok = False
        if ok:
            break
    entries = {}
    for idx in np.ndindex(raw.shape):
        v = float(raw[idx])
        if v > 0:
            prof = tuple(types[i][idx[1 + i]] for i in range(len(n_types)))
            entries[(states[idx[0]], prof)] = v
    mu_out = [float(v) for v in raw.sum(axis=tuple(range(1, raw.ndim)))]
    return validate_structure((states, mu_out, types, entries), name=name)


def random_game(rng, states, n_actions=(2, 2), lo=-1.0, hi=1.0, name=""):
    payoffs = rng.uniform(lo, hi, size=(len(n_actions),) + tuple(n_actions) + (len(states),))

    def u(i, aprof, th):
        return float(payoffs[(i,) + aprof + (th,)])

    actions = [[f"a{i}{k}" for k in range(n_actions[i])] for i in range(len(n_actions))]
    return make_game(actions, states, u, bound=max(abs(lo), abs(hi)), name=name)


def coin_duplicate(structure, rng=None):
    """Split every type into two labels with identical conditionals (50/50)."""
    states = list(structure.states)
    types = [[f"{t}{suffix}" for t in tl for suffix in ("h", "t")]
             for tl in structure.types]
    entries = {}
    players = structure.players
    for (th, prof), v in structure.mass.items():
        share = float(v) / (2 ** players)
        import itertools
        for suffixes in itertools.product(("h", "t"), repeat=players):
            labels = tuple(f"{structure.types[i][prof[i]]}{suffixes[i]}"
                           for i in range(players))
            entries[(states[th], labels)] = entries.get((states[th], labels), 0) + share
    return validate_structure((states, [float(v) for v in structure.prior],
                               types, entries), name=structure.name + "+coin")


def complete_info(states=("s",), mu=(1.0,)):
    entries = {(s, ("t", "t")): float(m) for s, m in zip(states, mu)}
    return validate_structure((list(states), list(mu), [["t"], ["t"]], entries))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
