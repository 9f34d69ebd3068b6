"""Ex-ante distances between information structures.

Three bisections over monotone feasibility predicates:

* `ack_distance`   — common (1-ε)-belief of the ε-support intersection has
                     prior mass ≥ 1-ε under both structures;
* `dfg_distance`   — the metrized variant with thresholds g(ε) = ε² and mass
                     bound f(ε) = 1 - ε(ε+1)/2 (strict >), a true metric;
* `weak_exante_distance` — the support-mass conditions only, no common
                     belief; the interim metric is selectable.

Truncation indeterminacy is handled by evaluating every predicate twice
(membership unknowns counted in / counted out) and bisecting both variants;
the reported interval brackets the true infimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import numerics as nm
from .belief import cp, event_mass
from .errors import IndeterminateDominated, ValidationError
from .metric import DEFAULT_DEPTH, DistanceInterval, MetricContext, in_eps_support


@dataclass
class AckParams:
    eta: object = None
    m_max: int = DEFAULT_DEPTH
    tol: float = 1e-3
    metric: str = "dpi"       # "dpi" | "tv"
    tv_depth: int = 2
    max_steps: int = 80


@dataclass
class AckResult:
    interval: DistanceInterval
    trace: list = field(default_factory=list)

    @property
    def lower(self):
        return self.interval.lower

    @property
    def upper(self):
        return self.interval.upper


def _check_compatible(p, q):
    if p.states != q.states:
        raise ValidationError(["structures live on different state sets"])
    for a, b in zip(p.prior, q.prior):
        if not nm.close(a, b, nm.VALIDATION_TOL):
            raise ValidationError(["structures have different priors over states"])


class _PairEngine:
    """Caches memberships for one (P, P') pair across the ε-sweep."""

    def __init__(self, p, q, params, context=None):
        _check_compatible(p, q)
        self.p, self.q = p, q
        self.params = params
        if context is None:
            context = MetricContext([p, q], depth=params.m_max, eta=params.eta)
        self.ctx = context
        self._members = {}

    def zero(self):
        return self.ctx.zero()

    def membership(self, slot, eps):
        """Tri-valued T̂_ε membership for each support key of structure `slot`."""
        key = (slot, eps)
        if key not in self._members:
            other = 1 - slot
            out = {}
            for skey in self.ctx.structures[slot].support:
                pt = self.ctx.point(slot, skey)
                own = in_eps_support(pt, self.ctx, slot, eps,
                                     self.params.metric, self.params.tv_depth)
                oth = in_eps_support(pt, self.ctx, other, eps,
                                     self.params.metric, self.params.tv_depth)
                if own is False or oth is False:
                    out[skey] = False
                elif own is True and oth is True:
                    out[skey] = True
                else:
                    out[skey] = None
            self._members[key] = out
        return self._members[key]

    def event(self, slot, eps, optimistic):
        members = self.membership(slot, eps)
        return frozenset(k for k, v in members.items()
                         if v is True or (optimistic and v is None))

    def side_mass(self, slot, eps, p_level, optimistic, use_cp):
        ev = self.event(slot, eps, optimistic)
        if use_cp:
            ev = cp(self.ctx.structures[slot], ev, p_level)
        return event_mass(self.ctx.structures[slot], ev)


def _bisect(engine, feas, lo, hi, params, trace, label):
    """Monotone bisection; returns (last infeasible, first feasible) bracket."""
    if feas(lo, trace, label):
        return lo, lo
    if not feas(hi, trace, label):
        raise IndeterminateDominated(
            f"{label}: infeasible at range top {hi}; raise m_max")
    steps = 0
    while float(hi) - float(lo) > params.tol and steps < params.max_steps:
        mid = (lo + hi) / 2
        if feas(mid, trace, label):
            hi = mid
        else:
            lo = mid
        steps += 1
    return lo, hi


def _distance(p, q, params, make_feas, hi_fn):
    engine = _PairEngine(p, q, params)
    trace = []
    lo0 = engine.zero()
    hi = hi_fn(engine)
    hi = Fraction(hi) if engine.ctx.exact else float(hi)

    feas_opt = make_feas(engine, optimistic=True)
    feas_pess = make_feas(engine, optimistic=False)
    lo_o, _ = _bisect(engine, feas_opt, lo0, hi, params, trace, "optimistic")
    _, hi_p = _bisect(engine, feas_pess, lo0, hi, params, trace, "pessimistic")
    if float(hi_p) < float(lo_o):  # can only happen by tolerance crumbs
        hi_p = lo_o
    return AckResult(DistanceInterval(lo_o, hi_p), trace)


def ack_distance(p, q, params=None):
    """Approximate-common-knowledge distance between two structures."""
    params = params or AckParams()

    def make(engine, optimistic):
        def feas(eps, trace, label):
            ok = True
            masses = []
            for slot in (0, 1):
                mass = engine.side_mass(slot, eps, 1 - eps, optimistic, use_cp=True)
                masses.append(mass)
                if not nm.ge(mass, 1 - eps, 1e-12):
                    ok = False
            trace.append({"eps": float(eps), "branch": label,
                          "mass_p": float(masses[0]), "mass_q": float(masses[1]),
                          "feasible": ok})
            return ok
        return feas

    # Range top: the d_pi diameter bound plus one (membership certainly true).
    return _distance(p, q, params, make, lambda e: e.ctx.diameter_bound() + 1)


def dfg_distance(p, q, params=None):
    """The metrized variant d^{f,g} with g(ε)=ε² and f(ε)=1-ε(ε+1)/2."""
    params = params or AckParams()

    def g(eps):
        return eps * eps

    def f(eps):
        return 1 - eps * (eps + 1) / 2

    def make(engine, optimistic):
        def feas(eps, trace, label):
            ok = True
            masses = []
            for slot in (0, 1):
                mass = engine.side_mass(slot, g(eps), 1 - g(eps), optimistic, use_cp=True)
                masses.append(mass)
                if not nm.gt(mass, f(eps), 1e-12):
                    ok = False
            trace.append({"eps": float(eps), "branch": label,
                          "mass_p": float(masses[0]), "mass_q": float(masses[1]),
                          "feasible": ok})
            return ok
        return feas

    def hi_fn(engine):
        hi = (float(engine.ctx.diameter_bound()) + 1) ** 0.5 + 1
        return Fraction(hi).limit_denominator(1000) if engine.ctx.exact else hi

    return _distance(p, q, params, make, hi_fn)


def feasibility_probe(p, q, eps, params=None, context=None):
    """(optimistic_ok, pessimistic_ok, masses) of the ACK feasibility at one ε.

    `optimistic_ok is False` certifies d_ACK(p, q) > ε regardless of
    truncation unknowns; `pessimistic_ok is True` certifies d_ACK ≤ ε.
    """
    params = params or AckParams()
    engine = _PairEngine(p, q, params, context=context)
    opt = pess = True
    masses = {}
    for slot in (0, 1):
        m_opt = engine.side_mass(slot, eps, 1 - eps, True, use_cp=True)
        m_pess = engine.side_mass(slot, eps, 1 - eps, False, use_cp=True)
        masses[slot] = (m_opt, m_pess)
        if not nm.ge(m_opt, 1 - eps, 1e-12):
            opt = False
        if not nm.ge(m_pess, 1 - eps, 1e-12):
            pess = False
    return opt, pess, masses


def weak_exante_distance(p, q, params=None):
    """d': the ε-support mass conditions alone (strict >), no common belief."""
    params = params or AckParams()

    def make(engine, optimistic):
        def feas(eps, trace, label):
            ok = True
            masses = []
            for slot in (0, 1):
                mass = engine.side_mass(slot, eps, None, optimistic, use_cp=False)
                masses.append(mass)
                if not nm.gt(mass, 1 - eps, 1e-12):
                    ok = False
            trace.append({"eps": float(eps), "branch": label,
                          "mass_p": float(masses[0]), "mass_q": float(masses[1]),
                          "feasible": ok})
            return ok
        return feas

    return _distance(p, q, params, make, lambda e: e.ctx.diameter_bound() + 1)
