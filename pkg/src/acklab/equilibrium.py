"""ε-BIBCE linear programs and everything built on top of them.

The LP variables are joint masses x(θ, τ, a) = p(θ, τ)·σ(a | θ, τ), with
auxiliaries y_i(a_i, τ_i) for belief invariance:

* normalization:      Σ_a x(θ,τ,a) = p(θ,τ) for every support point;
* belief invariance:  Σ_{a_{-i}} x(θ,τ,(a_i,a_{-i})) = y_i(a_i,τ_i)·p(θ,τ);
* ε-obedience:        Σ x·[u_i(a_i,·) - u_i(a_i',·)] ≥ -ε·(slack mass),

where the obedience slack mass is p(τ_i) under the "slice" convention (the
definition as displayed) or the recommendation mass Σ x(·,τ_i,a_i,·) under
the stricter "per-recommendation" convention; the two coincide at ε = 0.

Strict inequalities are implemented LP-closed (≥ instead of >), which keeps
the feasible set closed and is indistinguishable at reported tolerances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import numerics as nm
from .core import DecisionRule, Outcome, induced_outcome
from .errors import Infeasible, InstanceTooLarge, InternalContradiction, ValidationError
from .lp import solve_lp
from .metric import DistanceInterval

OBEDIENCE_SLICE = "slice"
OBEDIENCE_PER_REC = "per-recommendation"


class BibceLP:
    """Constraint system for the ε-BIBCE outcome polytope of (game, structure).

    `restrict` optionally limits the action profiles allowed at each support
    point (e.g. to rationalizable ones, which is outcome-preserving under the
    per-recommendation convention); `None` allows everything.
    """

    def __init__(self, game, structure, eps, obedience=OBEDIENCE_SLICE,
                 restrict=None, exact=False, solver="auto"):
        if list(game.states) != list(structure.states):
            raise ValidationError(["game and structure disagree on states"])
        self.game = game
        self.structure = structure
        self.eps = eps
        self.obedience = obedience
        self.exact = exact
        self.solver = solver

        support = structure.support
        all_profiles = list(game.profiles())
        self.x_index = {}
        self.x_keys = []
        for skey in support:
            allowed = all_profiles if restrict is None else list(restrict[skey])
            for aprof in allowed:
                self.x_index[(skey, aprof)] = len(self.x_keys)
                self.x_keys.append((skey, aprof))

        # y variables only for (i, type, action) combinations that can occur.
        y_seen = {}
        for (skey, aprof) in self.x_keys:
            _, prof = skey
            for i in range(structure.players):
                key = (i, prof[i], aprof[i])
                if key not in y_seen:
                    y_seen[key] = len(y_seen)
        self.y_index = {k: len(self.x_keys) + v for k, v in y_seen.items()}
        self.nvars = len(self.x_keys) + len(self.y_index)

        zero = Fraction(0) if exact else 0.0
        self.zero = zero
        a_eq, b_eq = [], []

        by_skey = {}
        by_sia = {}
        for idx, (skey, aprof) in enumerate(self.x_keys):
            by_skey.setdefault(skey, []).append(idx)
            _, prof = skey
            for i in range(structure.players):
                by_sia.setdefault((skey, i, aprof[i]), []).append(idx)

        for skey in support:
            row = {}
            for idx in by_skey.get(skey, []):
                row[idx] = 1
            a_eq.append(row)
            b_eq.append(structure.mass[skey])

        for (skey, i, a_i), idxs in sorted(by_sia.items()):
            _, prof = skey
            row = {idx: 1 for idx in idxs}
            ycol = self.y_index[(i, prof[i], a_i)]
            row[ycol] = -structure.mass[skey]
            a_eq.append(row)
            b_eq.append(zero)

        a_ub, b_ub = [], []
        slices = {}
        for idx, (skey, aprof) in enumerate(self.x_keys):
            _, prof = skey
            for i in range(structure.players):
                slices.setdefault((i, prof[i], aprof[i]), []).append(idx)
        for (i, t, a_i), idxs in sorted(slices.items()):
            n_actions = len(game.actions[i])
            for a_dev in range(n_actions):
                if a_dev == a_i:
                    continue
                row = {}
                for idx in idxs:
                    (th, prof), aprof = self.x_keys[idx]
                    dev_prof = aprof[:i] + (a_dev,) + aprof[i + 1:]
                    delta = game.u(i, aprof, th) - game.u(i, dev_prof, th)
                    coef = -delta
                    if obedience == OBEDIENCE_PER_REC:
                        coef = coef - eps
                    if coef != 0:
                        row[idx] = coef
                if obedience == OBEDIENCE_PER_REC:
                    rhs = zero
                else:
                    rhs = eps * structure.type_marginal(i, t)
                a_ub.append(row)
                b_ub.append(rhs)

        self.a_eq, self.b_eq = a_eq, b_eq
        self.a_ub, self.b_ub = a_ub, b_ub
        self._csr = None

    def _dense(self, rows):
        out = []
        for row in rows:
            r = [self.zero] * self.nvars
            for j, v in row.items():
                r[j] = v
            out.append(r)
        return out

    def _sparse(self):
        if self._csr is None:
            from scipy.sparse import csr_matrix

            def build(rows):
                if not rows:
                    return None
                data, indices, indptr = [], [], [0]
                for row in rows:
                    for j, v in sorted(row.items()):
                        indices.append(j)
                        data.append(float(v))
                    indptr.append(len(indices))
                return csr_matrix((data, indices, indptr),
                                  shape=(len(rows), self.nvars))
            self._csr = (build(self.a_eq), build(self.a_ub))
        return self._csr

    def _use_highs(self):
        if self.exact:
            return False
        if self.solver == "highs":
            return True
        if self.solver == "bundled":
            return False
        m = len(self.a_eq) + len(self.a_ub)
        from .lp import BUNDLED_CELL_LIMIT

        return (m + 1) * (self.nvars + m + 1) > BUNDLED_CELL_LIMIT

    def solve(self, objective=None, maximize=True):
        """objective: dict (aprof, state_idx) -> weight on ν; None = feasibility."""
        c = [self.zero] * self.nvars
        if objective:
            for idx, (skey, aprof) in enumerate(self.x_keys):
                th, _ = skey
                w = objective.get((aprof, th))
                if w:
                    c[idx] = c[idx] + w
        do_max = maximize and objective is not None
        if self._use_highs():
            from .lp import solve_sparse_highs

            eq_csr, ub_csr = self._sparse()
            return solve_sparse_highs(c, eq_csr, self.b_eq, ub_csr, self.b_ub,
                                      maximize=do_max)
        res = solve_lp(c, a_eq=self._dense(self.a_eq), b_eq=self.b_eq,
                       a_ub=self._dense(self.a_ub), b_ub=self.b_ub,
                       maximize=do_max, exact=self.exact, solver=self.solver)
        return res

    def extract(self, res):
        """Rebuild (x table, DecisionRule, Outcome) from an optimal LP result."""
        xs = res.x
        floor = 0 if self.exact else 1e-14
        table = {}
        for idx, (skey, aprof) in enumerate(self.x_keys):
            v = xs[idx]
            if v is not None and v > floor:
                table.setdefault(skey, {})[aprof] = v
        rule = {}
        for skey in self.structure.support:
            row = table.get(skey, {})
            total = sum(row.values())
            if not row or not total > 0:
                raise InternalContradiction(f"empty decision-rule row at {skey}")
            # Renormalize away LP pivot noise so rows sum to one exactly.
            rule[skey] = {a: v / total for a, v in row.items()}
        rule = DecisionRule(rule)
        outcome = induced_outcome(self.structure, rule)
        return table, rule, outcome


def solve_bibce(game, structure, eps, objective=None, maximize=True,
                obedience=OBEDIENCE_SLICE, restrict=None, solver="auto",
                exact=None):
    """Solve the ε-BIBCE LP; returns (x table, decision rule, outcome, value).

    Feasibility at ε = 0 is a theorem for unrestricted instances, so an
    infeasible answer there raises InternalContradiction.
    """
    if exact is None:
        exact = structure.exact and all(nm.is_exact(v)
                                        for tbl in game.payoff for v in tbl.values())
    if float(eps) < 0:
        raise Infeasible("negative obedience slack")
    lp = BibceLP(game, structure, eps, obedience=obedience,
                 restrict=restrict, exact=exact, solver=solver)
    res = lp.solve(objective, maximize=maximize)
    if res.status != "optimal":
        if restrict is not None:
            raise Infeasible(f"restricted BIBCE LP is {res.status}")
        raise InternalContradiction(
            f"BIBCE LP reported {res.status} at eps={eps}; existence guarantees "
            "feasibility for every valid instance", certificate=res)
    table, rule, outcome = lp.extract(res)
    return table, rule, outcome, res.value


class OutcomePolytope:
    """Support-function oracle over the ε-BIBCE outcomes of one instance."""

    VERTEX_DIM_CAP = 8

    def __init__(self, game, structure, eps=0, obedience=OBEDIENCE_SLICE,
                 restrict=None, solver="auto", exact=None):
        self.game = game
        self.structure = structure
        self.eps = eps
        if exact is None:
            exact = structure.exact and all(nm.is_exact(v)
                                            for tbl in game.payoff for v in tbl.values())
        self.lp = BibceLP(game, structure, eps, obedience=obedience,
                          restrict=restrict, exact=exact, solver=solver)
        self._h = {}
        self.keys = [(aprof, th) for aprof in game.profiles()
                     for th in range(len(game.states))]

    def _dir_key(self, direction):
        return tuple(sorted((k, nm.quantize_key(v, 1e-12))
                            for k, v in direction.items() if v))

    def support(self, direction):
        """h(c) = max c·ν over the polytope; returns (value, witness outcome)."""
        key = self._dir_key(direction)
        if key not in self._h:
            res = self.lp.solve(direction, maximize=True)
            if res.status != "optimal":
                raise InternalContradiction(
                    f"polytope LP status {res.status}", certificate=res)
            _, _, outcome = self.lp.extract(res)
            self._h[key] = (res.value, outcome)
        return self._h[key]

    def h(self, direction):
        return self.support(direction)[0]

    def contains(self, outcome, tol=nm.POLYTOPE_TOL, directions=None):
        """Support-function membership test along the given directions.

        An outer test: it can only fail points genuinely outside the
        polytope; passing certifies membership up to the direction family.
        """
        if directions is None:
            directions = coordinate_directions(self.keys)
        worst = 0.0
        for c in directions:
            val = sum(float(c.get(k, 0)) * float(outcome.value(k)) for k in self.keys)
            worst = max(worst, val - float(self.h(c)))
        return worst <= tol, worst

    def vertices(self, extra_directions=()):
        """Witness outcomes at coordinate and supplied directions, deduplicated.

        Only enabled in small dimension; every returned point is LP-feasible
        by construction (it is an optimizer), but the list may be a strict
        subset of the true vertex set.
        """
        if len(self.keys) > self.VERTEX_DIM_CAP:
            raise InstanceTooLarge(
                f"vertex listing capped at dimension {self.VERTEX_DIM_CAP}")
        seen, out = set(), []
        dirs = [{k: 1} for k in self.keys] + [{k: -1} for k in self.keys]
        dirs += [dict(d) for d in extra_directions]
        for c in dirs:
            _, outcome = self.support(c)
            sig = tuple(sorted((k, nm.quantize_key(v, 1e-7))
                               for k, v in outcome.dist.items()))
            if sig not in seen:
                seen.add(sig)
                out.append(outcome)
        return out


def outcome_support(game, structure, eps, direction, **kwargs):
    poly = OutcomePolytope(game, structure, eps, **kwargs)
    return poly.support(direction)


def sphere_directions(keys, count, seed=0):
    """Deterministic unit directions over the outcome coordinates."""
    if count <= 0:
        return []
    rng = np.random.default_rng(seed)
    dim = len(keys)
    vecs = rng.standard_normal((count, dim))
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    vecs = vecs / np.where(norms == 0, 1, norms)
    return [{k: float(v) for k, v in zip(keys, row)} for row in vecs]


def coordinate_directions(keys):
    out = []
    for k in keys:
        out.append({k: 1.0})
        out.append({k: -1.0})
    return out


def _direction_norm(direction):
    return math.sqrt(sum(float(v) ** 2 for v in direction.values()))


@dataclass
class StrategicDistanceResult:
    interval: DistanceInterval
    witness: dict = field(default_factory=dict)
    sampling_gap: float = 0.0

    @property
    def lower(self):
        return self.interval.lower

    @property
    def upper(self):
        return self.interval.upper


def strategic_distance(game, p, q, tol=1e-3, n_directions=64,
                       include_coordinates=True, extra_directions=(),
                       obedience=OBEDIENCE_SLICE, restrict_p=None, restrict_q=None,
                       solver="auto", seed=0):
    """d*(P, P' | G): Hausdorff-style gap between BIBCE outcome sets.

    Bisection over ε of the two inclusions O^0(G,P) ⊆ O_ε(G,P') and
    symmetrically, each tested through support functions along a fixed
    direction family (±coordinates, a deterministic sphere sample, plus any
    caller-supplied directions).  The lower endpoint is certified by a
    witnessed violation; the upper endpoint holds along the sampled family
    and is widened by an estimated covering gap (exact certification would
    need full vertex enumeration).
    """
    if p is q or (p.states == q.states and p.types == q.types and p.mass == q.mass):
        # Identical instances: both inclusions hold at every ε ≥ 0.
        return StrategicDistanceResult(DistanceInterval(0.0, 0.0), {}, 0.0)
    keys = [(aprof, th) for aprof in game.profiles()
            for th in range(len(game.states))]
    directions = []
    if include_coordinates:
        directions += coordinate_directions(keys)
    directions += sphere_directions(keys, n_directions, seed=seed)
    directions += [dict(d) for d in extra_directions]
    directions = [d for d in directions if _direction_norm(d) > 0]

    base_p = OutcomePolytope(game, p, 0, obedience=obedience,
                             restrict=restrict_p, solver=solver)
    base_q = OutcomePolytope(game, q, 0, obedience=obedience,
                             restrict=restrict_q, solver=solver)
    h0_p = {i: base_p.h(c) for i, c in enumerate(directions)}
    h0_q = {i: base_q.h(c) for i, c in enumerate(directions)}

    poly_cache = {}

    def fat_poly(which, eps):
        key = (which, float(eps))
        if key not in poly_cache:
            struct = p if which == "p" else q
            restrict = restrict_p if which == "p" else restrict_q
            poly_cache[key] = OutcomePolytope(game, struct, eps, obedience=obedience,
                                              restrict=restrict, solver=solver)
        return poly_cache[key]

    witness = {}

    def feas(eps):
        for i, c in enumerate(directions):
            norm = _direction_norm(c)
            slack = eps * norm + 1e-9
            if h0_p[i] > fat_poly("q", eps).h(c) + slack:
                witness[float(eps)] = ("P into O_eps(P')", i, c)
                return False
            if h0_q[i] > fat_poly("p", eps).h(c) + slack:
                witness[float(eps)] = ("P' into O_eps(P)", i, c)
                return False
        return True

    diameter = math.sqrt(2.0)
    lo, hi = 0.0, diameter
    if feas(lo):
        hi = lo
    elif not feas(hi):
        # Numerical corner: fall back to the trivial certified bracket.
        return StrategicDistanceResult(DistanceInterval(hi, hi), witness, 0.0)
    else:
        while hi - lo > tol:
            mid = (lo + hi) / 2
            if feas(mid):
                hi = mid
            else:
                lo = mid

    # Covering-gap estimate for the sampled-direction upper bound.
    probe = sphere_directions(keys, 32, seed=seed + 1)
    gap = 0.0
    if directions and probe:
        dmat = np.array([[d.get(k, 0.0) for k in keys] for d in directions], dtype=float)
        norms = np.linalg.norm(dmat, axis=1, keepdims=True)
        dmat = dmat / np.where(norms == 0, 1, norms)
        pm = np.array([[d.get(k, 0.0) for k in keys] for d in probe], dtype=float)
        dist = np.linalg.norm(pm[:, None, :] - dmat[None, :, :], axis=2).min(axis=1)
        gap = 2.0 * float(dist.max())
    upper = min(hi + gap, diameter)
    return StrategicDistanceResult(DistanceInterval(lo, max(upper, lo)), witness, gap)


def dstar_lower_certificate(game, p, q, eps, directions, obedience=OBEDIENCE_SLICE,
                            restrict_p=None, restrict_q=None, solver="auto"):
    """Certify d*(p, q | game) ≥ ε by witnessing an inclusion failure at ε.

    Tests, along the supplied directions only, whether some exact-BIBCE
    support value on one side exceeds the ε-BIBCE support value on the other
    by more than ε·||c||.  Restrictions must be support-sound at ε (ICR
    survivors under the per-recommendation convention qualify); soundness at
    the ε = 0 side follows since 0-BIBCE supports shrink with ε.

    Returns (violated, margin, witness_direction); `margin` is the largest
    violation found (negative when none).
    """
    polys = {
        ("p", 0): OutcomePolytope(game, p, 0, obedience=obedience,
                                  restrict=restrict_p, solver=solver),
        ("q", 0): OutcomePolytope(game, q, 0, obedience=obedience,
                                  restrict=restrict_q, solver=solver),
        ("p", 1): OutcomePolytope(game, p, eps, obedience=obedience,
                                  restrict=restrict_p, solver=solver),
        ("q", 1): OutcomePolytope(game, q, eps, obedience=obedience,
                                  restrict=restrict_q, solver=solver),
    }
    best = None
    witness = None
    for c in directions:
        norm = _direction_norm(c)
        if norm == 0:
            continue
        for zero_side, fat_side in (("p", "q"), ("q", "p")):
            lhs = float(polys[(zero_side, 0)].h(c))
            rhs = float(polys[(fat_side, 1)].h(c)) + float(eps) * norm
            margin = (lhs - rhs) / norm
            if best is None or margin > best:
                best = margin
                if margin > 1e-9:
                    witness = (zero_side, dict(c))
    return (best is not None and best > 1e-9), best, witness


def icr(game, structure, eps, solver="auto"):
    """Interim correlated rationalizability by iterated LP elimination.

    An action survives a round iff some conjecture over (θ, τ_{-i}, a_{-i})
    with the correct marginal on (θ, τ_{-i}) and opponent actions drawn from
    current survivors makes it an ε-best reply (LP-closed at -ε).

    Before each LP, slice-wise pessimistic/optimistic gain bounds settle the
    clear-cut cases: a deviation whose gain exceeds ε under every conjecture
    kills the action, and an action whose deviations stay below ε under some
    product of slice-wise optima survives; only the ambiguous band pays for
    an LP.
    """
    players = structure.players
    surv = {(i, t): set(range(len(game.actions[i])))
            for i in range(players) for t in range(len(structure.types[i]))}

    # Dense float payoff views: u_view[i][a_i, flat_opp, θ] with the opponent
    # axis in canonical profile order (so flat indices are stride products).
    opp_strides = []
    u_view = []
    n_states = len(game.states)
    for i in range(players):
        other_sizes = [len(game.actions[j]) for j in range(players) if j != i]
        strides = []
        acc = 1
        for size in reversed(other_sizes):
            strides.append(acc)
            acc *= size
        strides = list(reversed(strides))
        flat = acc
        arr = np.zeros((len(game.actions[i]), flat, n_states))
        for (aprof, th), v in game.payoff[i].items():
            idx = 0
            pos = 0
            for j in range(players):
                if j == i:
                    continue
                idx += aprof[j] * strides[pos]
                pos += 1
            arr[aprof[i], idx, th] = float(v)
        u_view.append(arr)
        opp_strides.append(strides)

    flat_cache = {}
    version = [0]

    def slice_views(i, t):
        """Per-belief-slice (θ, flat opponent indices, weight), cached per round."""
        key = (i, t, version[0])
        if key not in flat_cache:
            belief = structure.interim(i, t)
            opp_players = [j for j in range(players) if j != i]
            views = []
            for (th, opp_prof), bv in sorted(belief.items()):
                allowed = [sorted(surv[(j, opp_prof[pos])])
                           for pos, j in enumerate(opp_players)]
                flat = np.zeros(1, dtype=int)
                for arr_a, stride in zip(allowed, opp_strides[i]):
                    flat = (flat[:, None] + np.asarray(arr_a) * stride).ravel()
                views.append((th, flat, float(bv)))
            flat_cache[key] = views
        return flat_cache[key]

    def bounds(i, t, a_i):
        """(worst-case deviation gain, best-case max deviation gain)."""
        lo_total = np.zeros(len(game.actions[i]))
        hi_total = np.zeros(len(game.actions[i]))
        for th, flat, bv in slice_views(i, t):
            delta = u_view[i][:, flat, th] - u_view[i][a_i, flat, th]
            lo_total += bv * delta.min(axis=1)
            hi_total += bv * delta.max(axis=1)
        lo_total[a_i] = -np.inf
        hi_total[a_i] = -np.inf
        return lo_total.max(), hi_total.max()

    def feasible(i, t, a_i):
        belief = structure.interim(i, t)
        bkeys = sorted(belief)
        opp_players = [j for j in range(players) if j != i]
        cols = []
        for bk in bkeys:
            th, opp_prof = bk
            allowed = [sorted(surv[(j, opp_prof[pos])])
                       for pos, j in enumerate(opp_players)]
            for a_opp in itertools.product(*allowed):
                cols.append((bk, a_opp))
        index = {ck: j for j, ck in enumerate(cols)}
        nv = len(cols)
        zero = structure.zero()
        a_eq = []
        b_eq = []
        for bk in bkeys:
            row = [zero] * nv
            for ck, j in index.items():
                if ck[0] == bk:
                    row[j] = 1
            a_eq.append(row)
            b_eq.append(belief[bk])
        a_ub, b_ub = [], []
        for a_dev in range(len(game.actions[i])):
            if a_dev == a_i:
                continue
            row = [zero] * nv
            nonzero = False
            for (bk, a_opp), j in index.items():
                th, _ = bk
                prof = _combine(i, a_i, opp_players, a_opp)
                dev = _combine(i, a_dev, opp_players, a_opp)
                d = game.u(i, dev, th) - game.u(i, prof, th)
                if d != 0:
                    row[j] = d
                    nonzero = True
            if nonzero:
                a_ub.append(row)
                b_ub.append(eps if structure.exact else float(eps) + 1e-9)
        res = solve_lp([zero] * nv, a_eq=a_eq, b_eq=b_eq, a_ub=a_ub, b_ub=b_ub,
                       exact=structure.exact, solver=solver)
        return res.status == "optimal"

    # The cached slice views go stale within a sweep as opponents' sets
    # shrink; stale views are supersets, which only makes both bounds more
    # conservative, so correctness is unaffected (the LP always uses fresh
    # survivor sets).
    changed = True
    eps_f = float(eps)
    while changed:
        changed = False
        version[0] += 1
        for (i, t) in sorted(surv):
            for a_i in sorted(surv[(i, t)]):
                if len(surv[(i, t)]) == 1:
                    continue
                worst_forced, best_possible = bounds(i, t, a_i)
                if worst_forced > eps_f + 1e-7:
                    alive = False  # some deviation profits under every conjecture
                elif best_possible <= eps_f - 1e-7:
                    alive = True   # no deviation can profit under any conjecture
                else:
                    alive = feasible(i, t, a_i)
                if not alive:
                    surv[(i, t)].discard(a_i)
                    changed = True
    return {k: sorted(v) for k, v in surv.items()}


def _combine(i, a_i, opp_players, a_opp):
    prof = {}
    prof[i] = a_i
    for pos, j in enumerate(opp_players):
        prof[j] = a_opp[pos]
    return tuple(prof[j] for j in sorted(prof))


def icr_restriction(game, structure, surv):
    """Per-support-point allowed action profiles implied by ICR survivors."""
    out = {}
    for skey in structure.support:
        _, prof = skey
        allowed = [sorted(surv[(i, prof[i])]) for i in range(structure.players)]
        out[skey] = list(itertools.product(*allowed))
    return out


def verify_bne(game, structure, profile, eps):
    """Check a behavioral profile for ε-obedience under conditional independence.

    `profile` maps (player, type_idx) to a dict {action_idx: prob}.  Returns
    (ok, worst interim deviation gain).
    """
    players = structure.players
    worst = None
    for i in range(players):
        for t in range(len(structure.types[i])):
            belief = structure.interim(i, t)
            own = profile[(i, t)]
            opp_players = [j for j in range(players) if j != i]
            for a_i, pr in own.items():
                if not pr > 0:
                    continue
                for a_dev in range(len(game.actions[i])):
                    if a_dev == a_i:
                        continue
                    gain = 0 if not structure.exact else Fraction(0)
                    for (th, opp_prof), bv in belief.items():
                        allowed = [profile[(j, opp_prof[pos])]
                                   for pos, j in enumerate(opp_players)]
                        for a_opp in itertools.product(*[sorted(a) for a in allowed]):
                            w = bv
                            for pos, a_j in enumerate(a_opp):
                                w = w * allowed[pos][a_j]
                            if not w > 0:
                                continue
                            prof_now = _combine(i, a_i, opp_players, a_opp)
                            prof_dev = _combine(i, a_dev, opp_players, a_opp)
                            gain = gain + w * (game.u(i, prof_dev, th) -
                                               game.u(i, prof_now, th))
                    if worst is None or gain > worst:
                        worst = gain
    if worst is None:
        worst = structure.zero()
    ok = nm.ge(float(eps) if not structure.exact else eps, worst, 1e-9)
    return ok, worst


def rule_obedience_margins(game, structure, rule):
    """Per-recommendation obedience margins of a decision rule.

    Returns {(player, type_idx, action_idx): margin} where the margin is the
    smallest conditional payoff advantage of following the recommendation
    over any deviation, conditioning on (τ_i, recommended a_i).  A rule is
    ε-obedient per recommendation iff every margin is ≥ -ε.
    """
    players = structure.players
    zero = structure.zero()
    margins = {}
    slices = {}
    for skey in structure.support:
        th, prof = skey
        pmass = structure.mass[skey]
        row = rule.table[skey]
        for aprof, s in row.items():
            w = pmass * s
            if not w > zero:
                continue
            for i in range(players):
                slices.setdefault((i, prof[i], aprof[i]), []).append((th, aprof, w))
    for (i, t, a_i), cells in sorted(slices.items()):
        total = sum(w for _, _, w in cells)
        worst = None
        for a_dev in range(len(game.actions[i])):
            if a_dev == a_i:
                continue
            gain = zero
            for th, aprof, w in cells:
                dev = aprof[:i] + (a_dev,) + aprof[i + 1:]
                gain = gain + w * (game.u(i, aprof, th) - game.u(i, dev, th))
            gain = gain / total
            worst = gain if worst is None else min(worst, gain)
        if worst is not None:
            margins[(i, t, a_i)] = worst
    return margins


def profile_rule(game, structure, profile):
    """The conditionally independent decision rule of a behavioral profile."""
    table = {}
    for skey in structure.support:
        _, prof = skey
        row = {}
        per_player = [profile[(i, prof[i])] for i in range(structure.players)]
        for aprof in itertools.product(*[sorted(p) for p in per_player]):
            w = 1 if structure.exact else 1.0
            for i, a_i in enumerate(aprof):
                w = w * per_player[i][a_i]
            if w > 0:
                row[aprof] = w
        table[skey] = row
    return DecisionRule(table)


def bne_search_tiny(game, structure, eps=0, max_combos=300_000):
    """Exhaustive support enumeration for 2-player instances within hard caps.

    For two players the per-type indifference conditions are linear in the
    opponent's behavioral strategy, so each support profile reduces to two
    decoupled LP feasibility problems plus a final verification.
    """
    if structure.players != 2:
        raise InstanceTooLarge("bne search supports exactly 2 players")
    for i in range(2):
        if len(game.actions[i]) > 3 or len(structure.types[i]) > 4:
            raise InstanceTooLarge("caps: <=3 actions and <=4 types per player")

    def supports_for(i):
        subsets = []
        acts = range(len(game.actions[i]))
        per_type = []
        for _ in structure.types[i]:
            opts = []
            for r in range(1, len(game.actions[i]) + 1):
                opts.extend(itertools.combinations(acts, r))
            per_type.append(opts)
        return list(itertools.product(*per_type))

    sup1, sup2 = supports_for(0), supports_for(1)
    if len(sup1) * len(sup2) > max_combos:
        raise InstanceTooLarge(f"support enumeration would visit "
                               f"{len(sup1) * len(sup2)} combinations")

    found = []
    seen = set()
    for s1 in sup1:
        for s2 in sup2:
            prof = _solve_support_profile(game, structure, (s1, s2))
            if prof is None:
                continue
            ok, worst = verify_bne(game, structure, prof, eps)
            if not ok:
                continue
            sig = tuple(sorted((k, tuple(sorted((a, nm.quantize_key(v, 1e-7))
                                                for a, v in d.items())))
                               for k, d in prof.items()))
            if sig in seen:
                continue
            seen.add(sig)
            found.append(prof)
    return found


def _solve_support_profile(game, structure, supports):
    """Find a behavioral profile with the given per-type supports, or None."""
    profile = {}
    for i in (0, 1):
        j = 1 - i
        # Unknowns: player j's strategy; constraints: player i indifferent on
        # their support, given beliefs; player j's rows sum to one.
        cols = []
        for t_j, sup in enumerate(supports[j]):
            for a in sup:
                cols.append((t_j, a))
        index = {ck: k for k, ck in enumerate(cols)}
        zero = structure.zero()
        a_eq, b_eq = [], []
        for t_j, sup in enumerate(supports[j]):
            row = [zero] * len(cols)
            for a in sup:
                row[index[(t_j, a)]] = 1
            a_eq.append(row)
            b_eq.append(1)
        for t_i, sup in enumerate(supports[i]):
            if len(sup) < 2:
                continue
            belief = structure.interim(i, t_i)
            for a, b in zip(sup, sup[1:]):
                row = [zero] * len(cols)
                for (th, opp_prof), bv in belief.items():
                    t_j = opp_prof[0]
                    for a_j in supports[j][t_j]:
                        prof_a = (a, a_j) if i == 0 else (a_j, a)
                        prof_b = (b, a_j) if i == 0 else (a_j, b)
                        coef = bv * (game.u(i, prof_a, th) - game.u(i, prof_b, th))
                        if coef != 0:
                            k = index[(t_j, a_j)]
                            row[k] = row[k] + coef
                a_eq.append(row)
                b_eq.append(zero)
        res = solve_lp([zero] * len(cols), a_eq=a_eq, b_eq=b_eq,
                       exact=structure.exact, solver="bundled")
        if res.status != "optimal":
            return None
        for t_j, sup in enumerate(supports[j]):
            dist = {}
            for a in sup:
                v = res.x[index[(t_j, a)]]
                if v > 0:
                    dist[a] = v
            if not dist:
                return None
            profile[(j, t_j)] = dist
    return profile


def value_distance(game, p, q, tol=1e-3, n_directions=64,
                   obedience=OBEDIENCE_SLICE, solver="auto", seed=0):
    """d^V: the strategic-distance machinery applied to ex-ante value sets.

    Values are linear images of outcomes (per-player expected payoffs), so
    support functions in value space are outcome support functions at pulled
    back directions.
    """
    players = game.players
    keys = [(aprof, th) for aprof in game.profiles()
            for th in range(len(game.states))]

    def pull_back(w):
        direction = {}
        for (aprof, th) in keys:
            val = sum(float(w[i]) * float(game.u(i, aprof, th))
                      for i in range(players))
            if val:
                direction[(aprof, th)] = val
        return direction

    if players == 2:
        ws = [(math.cos(2 * math.pi * k / max(n_directions, 4)),
               math.sin(2 * math.pi * k / max(n_directions, 4)))
              for k in range(max(n_directions, 4))]
    else:
        rng = np.random.default_rng(seed)
        ws = rng.standard_normal((n_directions, players))
        ws = [tuple(row / np.linalg.norm(row)) for row in ws]
    for i in range(players):
        e = [0.0] * players
        e[i] = 1.0
        ws.append(tuple(e))
        ws.append(tuple(-v for v in e))

    base_p = OutcomePolytope(game, p, 0, obedience=obedience, solver=solver)
    base_q = OutcomePolytope(game, q, 0, obedience=obedience, solver=solver)
    h0p = [base_p.h(pull_back(w)) for w in ws]
    h0q = [base_q.h(pull_back(w)) for w in ws]
    cache = {}

    def hp(which, eps, k):
        key = (which, float(eps))
        if key not in cache:
            struct = p if which == "p" else q
            cache[key] = OutcomePolytope(game, struct, eps,
                                         obedience=obedience, solver=solver)
        return cache[key].h(pull_back(ws[k]))

    def feas(eps):
        for k in range(len(ws)):
            slack = eps * math.sqrt(sum(v * v for v in ws[k])) + 1e-9
            if h0p[k] > hp("q", eps, k) + slack:
                return False
            if h0q[k] > hp("p", eps, k) + slack:
                return False
        return True

    diam = 2.0 * game.m_of_u() * math.sqrt(players)
    lo, hi = 0.0, diam
    if feas(lo):
        hi = lo
    else:
        while hi - lo > tol:
            mid = (lo + hi) / 2
            if feas(mid):
                hi = mid
            else:
                lo = mid
    return DistanceInterval(lo, hi)


def design_extremes(game, structure, u_designer, eps=0,
                    obedience=OBEDIENCE_SLICE, solver="auto"):
    """(V_MAX, V_MIN): designer payoff at best and worst BIBCE selection."""
    poly = OutcomePolytope(game, structure, eps, obedience=obedience, solver=solver)
    direction = dict(u_designer)
    v_max = poly.h(direction)
    v_min = -poly.h({k: -v for k, v in direction.items()})
    return v_max, v_min
