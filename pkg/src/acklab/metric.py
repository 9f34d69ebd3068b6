"""The product metric on universal states, level metrics, and ε-supports.

`d_pi` returns an interval: the truncated series is a lower bound, and the
geometric tail η^{m+1}/(1-η) bounds what deeper levels could add.  Every
topological test built on it is therefore three-valued (True/False/None),
with None meaning "undecidable at this truncation depth".

The per-level metric is exact Wasserstein-1 with ground costs capped at 1
and recursively induced: atoms at level k are (state, opponent classes) and
their ground distance is 1 across states, else the max over opponents of the
level-(k-1) hierarchy distance.  This metrizes the weak topology level by
level; the choice is a design decision, the topology is what matters.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import numerics as nm
from .errors import DepthMismatch, ValidationError
from .hierarchy import ROOT, build_hierarchies
from .transport import TransportCache, total_variation, wasserstein1

DEFAULT_ETA = 0.5
DEFAULT_DEPTH = 8


@dataclass(frozen=True)
class DistanceInterval:
    """[lower, upper] bracket on a distance; upper-lower is the tail bound."""

    lower: object
    upper: object

    def __post_init__(self):
        if float(self.lower) > float(self.upper) + 1e-15:
            raise ValidationError([f"interval [{self.lower}, {self.upper}] inverted"])

    def below(self, eps):
        """Tri-valued `distance < eps`."""
        if self.upper < eps:
            return True
        if self.lower >= eps:
            return False
        return None

    def midpoint(self):
        return (float(self.lower) + float(self.upper)) / 2.0


@dataclass(frozen=True)
class UniversalPoint:
    """A payoff state plus one top-level hierarchy class id per player."""

    state: int
    ids: tuple
    depth: int
    provenance: str = ""


def level_metric(belief_a, belief_b, ground, exact=False):
    """Exact W1 between two finite beliefs over a shared atom universe.

    `belief_a`/`belief_b` are dicts atom -> weight; `ground(x, y)` returns
    the (capped at 1) ground distance between atoms.
    """
    atoms = sorted(set(belief_a) | set(belief_b))
    zero = Fraction(0) if exact else 0.0
    p = [belief_a.get(a, zero) for a in atoms]
    q = [belief_b.get(a, zero) for a in atoms]
    cost = [[ground(x, y) for y in atoms] for x in atoms]
    return wasserstein1(p, q, cost, exact=exact)


class MetricContext:
    """Shared universe plus memoized hierarchy distances for a structure set."""

    def __init__(self, structures, depth=DEFAULT_DEPTH, eta=None, exact=None):
        self.structures = list(structures)
        self.depth = depth
        if exact is None:
            exact = all(s.exact for s in self.structures)
        self.exact = exact
        if eta is None:
            eta = Fraction(1, 2) if exact else DEFAULT_ETA
        if not 0 < float(eta) < 1:
            raise ValidationError([f"eta {eta} outside (0,1)"])
        self.eta = Fraction(eta) if exact else float(eta)
        self.universe, self.assign = build_hierarchies(self.structures, depth)
        self._rho = TransportCache()
        self._dw = {}

    # -- plumbing -----------------------------------------------------------

    def zero(self):
        return Fraction(0) if self.exact else 0.0

    def tail(self, depth=None):
        m = self.depth if depth is None else depth
        return nm.npow(self.eta, m + 1) / (1 - self.eta)

    def diameter_bound(self):
        return 1 + self.eta / (1 - self.eta)

    def point(self, slot, support_key, provenance=None):
        th, prof = support_key
        s = self.structures[slot]
        ids = tuple(self.assign[(slot, i, prof[i])][self.depth - 1]
                    for i in range(s.players))
        if provenance is None:
            provenance = f"{s.name or slot}:{support_key}"
        return UniversalPoint(th, ids, self.depth, provenance)

    def support_points(self, slot):
        return [self.point(slot, key) for key in self.structures[slot].support]

    def grid_point(self, state, top_ids, provenance="grid"):
        """Wrap externally interned (grid) hierarchies as a universal point."""
        for cid in top_ids:
            if self.universe.level(cid) != self.depth:
                raise DepthMismatch("grid hierarchy depth != context depth")
        return UniversalPoint(state, tuple(top_ids), self.depth, provenance)

    # -- hierarchy distances -------------------------------------------------

    def rho(self, a, b):
        """W1 between the level-k beliefs of two same-level class ids."""
        if a == b:
            return self.zero()
        key = (min(a, b), max(a, b))
        hit = self._rho.get(key)
        if hit is not None:
            return hit
        uni = self.universe
        if uni.level(a) != uni.level(b):
            raise DepthMismatch("level metric between different levels")
        bel_a = dict(uni.belief(a))
        bel_b = dict(uni.belief(b))

        def ground(x, y):
            (th1, opp1), (th2, opp2) = x, y
            if th1 != th2:
                return 1 if self.exact else 1.0
            if not opp1:
                return self.zero()
            best = self.zero()
            for c1, c2 in zip(opp1, opp2):
                d = self.dw(c1, c2)
                if d > best:
                    best = d
            return best

        val = level_metric(bel_a, bel_b, ground, exact=self.exact)
        self._rho.put(key, val)
        return val

    def dw(self, a, b):
        """Product (max over levels) hierarchy distance between class ids."""
        if a == b:
            return self.zero()
        key = (min(a, b), max(a, b))
        if key in self._dw:
            return self._dw[key]
        uni = self.universe
        pa, pb = uni.parent(a), uni.parent(b)
        below = self.zero()
        if pa != ROOT and pb != ROOT and pa is not None and pb is not None:
            below = self.dw(pa, pb)
        val = max(below, self.rho(a, b))
        self._dw[key] = val
        return val

    def d_pi(self, pa, pb, m_max=None):
        """Interval for the product metric between two universal points."""
        if pa.depth != pb.depth or pa.depth != self.depth:
            raise DepthMismatch("points truncated at different depths")
        m = self.depth if m_max is None else min(m_max, self.depth)
        uni = self.universe
        chains_a = [uni.chain(c) for c in pa.ids]
        chains_b = [uni.chain(c) for c in pb.ids]
        lower = 1 if pa.state != pb.state else self.zero()
        if self.exact:
            lower = Fraction(lower)
        for n in range(1, m + 1):
            worst = self.zero()
            for ca, cb in zip(chains_a, chains_b):
                d = self.dw(ca[n - 1], cb[n - 1])
                if d > worst:
                    worst = d
            lower = lower + nm.npow(self.eta, n) * worst
        return DistanceInterval(lower, lower + self.tail(m))

    def tv_depth(self, pa, pb, m):
        """Exact depth-m distance: state indicator plus max-player TV of level-m beliefs.

        TV matches atoms by exact class equality, so this is a strict
        (zero-tail) interim metric; useful as the `tv` selector of the weak
        ex-ante distance.
        """
        if m > self.depth:
            raise DepthMismatch("tv depth exceeds context depth")
        if pa.state != pb.state:
            return 1 if self.exact else 1.0
        uni = self.universe
        worst = self.zero()
        for ca, cb in zip(pa.ids, pb.ids):
            ia = uni.chain(ca)[m - 1]
            ib = uni.chain(cb)[m - 1]
            if ia == ib:
                continue
            bel_a = dict(uni.belief(ia))
            bel_b = dict(uni.belief(ib))
            atoms = sorted(set(bel_a) | set(bel_b))
            zero = self.zero()
            tv = total_variation([bel_a.get(x, zero) for x in atoms],
                                 [bel_b.get(x, zero) for x in atoms],
                                 exact=self.exact)
            if tv > worst:
                worst = tv
        return worst


def d_pi(point_a, point_b, context, m_max=None):
    return context.d_pi(point_a, point_b, m_max=m_max)


def in_eps_support(point, context, slot, eps, metric="dpi", tv_depth=2):
    """Tri-valued membership of `point` in the ε-support of structure `slot`.

    Implements the ε-expansion of the support: true iff some support point
    is within ε.  With the `dpi` metric the answer is None (indeterminate)
    whenever truncation leaves the comparison unresolved; the caller either
    raises the depth or evaluates optimistically/pessimistically.
    """
    best = None  # tri-state: False (all far), True (one close), None
    any_indet = False
    for key in context.structures[slot].support:
        other = context.point(slot, key)
        if metric == "dpi":
            verdict = context.d_pi(point, other).below(eps)
        else:
            verdict = context.tv_depth(point, other, tv_depth) < eps
        if verdict is True:
            return True
        if verdict is None:
            any_indet = True
    return None if any_indet else False


def that_T(context, slot_p, slot_q, eps, candidates=None, metric="dpi", tv_depth=2):
    """T̂_ε members among `candidates` (default: both supports), tri-valued.

    Returns a dict point -> True/False/None for membership in the
    intersection of the two ε-supports.
    """
    if candidates is None:
        candidates = context.support_points(slot_p) + context.support_points(slot_q)
    out = {}
    for pt in candidates:
        a = in_eps_support(pt, context, slot_p, eps, metric, tv_depth)
        b = in_eps_support(pt, context, slot_q, eps, metric, tv_depth)
        if a is False or b is False:
            out[pt] = False
        elif a is True and b is True:
            out[pt] = True
        else:
            out[pt] = None
    return out
