"""Exact Wasserstein-1 between finite distributions via the transport LP.

Costs are expected to be a metric capped at 1, so the overlap reduction
(transporting shared mass for free) is valid and keeps the LPs tiny.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import LPNumericalFailure
from .lp import solve_lp
from .numerics import is_exact

_CACHE_MAX = 200_000


class TransportCache:
    """Memo table for repeated W1 queries (chains hit the same pairs a lot)."""

    def __init__(self):
        self._table = {}

    def get(self, key):
        return self._table.get(key)

    def put(self, key, value):
        if len(self._table) < _CACHE_MAX:
            self._table[key] = value


def wasserstein1(p, q, cost, exact=False):
    """W1 between weight vectors ``p``, ``q`` over a shared atom list.

    ``cost[i][j]`` is the ground distance between atom i and atom j, assumed
    symmetric, zero on the diagonal, and capped at 1.  Weights must each sum
    to one; the value returned is the optimal transport cost.
    """
    n = len(p)
    if len(q) != n:
        raise ValueError("weight vectors must share the atom universe")
    zero = Fraction(0) if exact else 0.0
    # Overlap reduction: only net surpluses move.
    surplus, deficit = [], []
    for i in range(n):
        d = p[i] - q[i]
        if d > zero:
            surplus.append((i, d))
        elif d < zero:
            deficit.append((i, -d))
    if not surplus:
        return zero
    if len(surplus) == 1 and len(deficit) == 1:
        return surplus[0][1] * cost[surplus[0][0]][deficit[0][0]]

    nvars = len(surplus) * len(deficit)
    c = []
    for i, _ in surplus:
        for j, _ in deficit:
            c.append(cost[i][j])
    a_eq, b_eq = [], []
    for si in range(len(surplus)):
        row = [zero] * nvars
        for dj in range(len(deficit)):
            row[si * len(deficit) + dj] = 1
        a_eq.append(row)
        b_eq.append(surplus[si][1])
    # One sink constraint is redundant given the source constraints; drop it.
    for dj in range(len(deficit) - 1):
        row = [zero] * nvars
        for si in range(len(surplus)):
            row[si * len(deficit) + dj] = 1
        a_eq.append(row)
        b_eq.append(deficit[dj][1])
    res = solve_lp(c, a_eq=a_eq, b_eq=b_eq, exact=exact, solver="bundled")
    if res.status != "optimal":
        raise LPNumericalFailure(f"transport LP ended with status {res.status}")
    return res.value


def total_variation(p, q, exact=False):
    zero = Fraction(0) if exact else 0.0
    pos = zero
    for a, b in zip(p, q):
        d = a - b
        if d > zero:
            pos += d
    return pos


def is_exact_weights(p, q):
    return all(is_exact(v) for v in p) and all(is_exact(v) for v in q)
