"""Constructive gadgets: grids, scoring games, infection games, quantization
to simple structures, correlation embedding, richness tools, email chains.

Grid elements are coherent truncated hierarchies whose level-k beliefs put
multiples of 1/z on (state, opponent-grid-class) cells.  They are interned
into the same universe as structure hierarchies, so every metric query
works uniformly on real and synthetic points.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

from . import numerics as nm
from .core import FiniteInformationStructure, make_game, validate_structure
from .errors import (
    InstanceTooLarge,
    NotRich,
    NotSeparated,
    NotStronglyRich,
    ResolutionTooCoarse,
    SingleStateUnsupported,
    ValidationError,
)
from .hierarchy import is_simple
from .metric import MetricContext, UniversalPoint

# The report spaces at the acceptance sizes reach |A_i| = 480 at depth 2,
# resolution 3, so the guard sits just above that.
ACTION_CAP = 512


def series_bound(m, z, eta):
    """The grid approximation bound η/z·(1-η^{m+1})/(1-η) + η^m/(1-η)."""
    eta = float(eta)
    return (eta / z) * (1 - eta ** (m + 1)) / (1 - eta) + eta ** m / (1 - eta)


def compositions(total, cells):
    """All tuples of `cells` nonnegative ints summing to `total`."""
    if cells == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in compositions(total - head, cells - 1):
            yield (head,) + rest


def round_to_grid(values, z, exact=False):
    """Largest-remainder rounding of a probability vector to multiples of 1/z.

    Deterministic: remainder ties break toward lower index.
    """
    scaled = [Fraction(v).limit_denominator(10**12) * z if not isinstance(v, Fraction)
              else v * z for v in values]
    floors = [int(s) for s in scaled]
    residual = z - sum(floors)
    fracs = sorted(range(len(values)), key=lambda k: (-(scaled[k] - floors[k]), k))
    out = list(floors)
    for k in fracs[:residual]:
        out[k] += 1
    if exact:
        return [Fraction(v, z) for v in out]
    return [v / z for v in out]


@dataclass
class GridSpec:
    """A coherent depth-m grid: per-player lists of top-level class ids."""

    depth: int
    resolution: int
    per_player: tuple  # tuple over players of tuple of class ids
    context: MetricContext = field(repr=False)
    kept_points: list = None  # populated when built with an exclusion set

    def actions(self, player):
        return self.per_player[player]

    def points(self, cap=20_000):
        """Universal points (θ, grid profile); guarded against blowup."""
        ctx = self.context
        n_states = len(ctx.structures[0].states)
        total = n_states
        for ids in self.per_player:
            total *= len(ids)
        if total > cap:
            raise InstanceTooLarge(f"grid point enumeration would produce {total} points")
        out = []
        for th in range(n_states):
            for prof in itertools.product(*self.per_player):
                out.append(ctx.grid_point(th, prof, provenance="grid"))
        return out


def _grid_value(v, exact):
    return v if exact else float(v)


def enumerate_grid_levels(context, m, z, cap=ACTION_CAP):
    """Per-level grid class ids up to depth m, resolution z (two players).

    Level-k elements are all grid distributions over (state, level-(k-1)
    grid class); the levels are NOT tied by coherency, matching the
    product-of-levels report space of the scoring game (coherency would
    couple the levels and destroy the level-by-level pinning argument).
    """
    structures = context.structures
    if structures[0].players != 2:
        raise InstanceTooLarge("full grid enumeration implemented for 2 players")
    n_states = len(structures[0].states)
    uni = context.universe
    exact = uni.exact

    level_ids = []
    tuple_count = 1
    for level in range(1, m + 1):
        if level == 1:
            atoms = [(th, ()) for th in range(n_states)]
        else:
            atoms = [(th, (cid,)) for th in range(n_states) for cid in level_ids[-1]]
        if len(atoms) > 2000:
            raise InstanceTooLarge(f"grid atom space at level {level} is {len(atoms)}")
        count = math.comb(z + len(atoms) - 1, len(atoms) - 1)
        tuple_count *= count
        if tuple_count > cap:
            raise InstanceTooLarge(
                f"grid tuple count {tuple_count} at (m={m}, z={z}) exceeds cap {cap}")
        ids = []
        for comp in compositions(z, len(atoms)):
            belief = {atom: _grid_value(Fraction(c, z), exact)
                      for atom, c in zip(atoms, comp) if c}
            ids.append(uni.intern(level, belief))
        level_ids.append(sorted(set(ids)))
    return level_ids


def enumerate_grid(context, m, z, cap=ACTION_CAP):
    """Full coherent grid at depth m: level-m grid distributions with derived
    marginals (quantization images live here; reports use the level tuples)."""
    levels = enumerate_grid_levels(context, m, z, cap=max(cap, 100_000))
    ids = levels[-1]
    if len(ids) > cap:
        raise InstanceTooLarge(
            f"grid size {len(ids)} at (m={m}, z={z}) exceeds cap {cap}")
    return ids


def build_grid(m, z, exclude=(), eps=None, context=None, corpus=None,
               eta=None, cap=ACTION_CAP):
    """Grid restricted to the complement of the ε-neighborhood of `exclude`.

    With `corpus` given (a list of UniversalPoint), the grid is the set of
    quantized corpus hierarchies instead of the full enumeration; this is
    how long-chain instances stay tractable.  The series bound is checked
    whenever eps is given.
    """
    if context is None:
        raise ValidationError(["build_grid needs a MetricContext"])
    eta_val = float(context.eta if eta is None else eta)
    if eps is not None:
        bound = series_bound(m, z, eta_val)
        if bound >= float(eps):
            suggestion = _minimal_mz(float(eps), eta_val)
            raise ResolutionTooCoarse(
                f"series bound {bound:.4g} at (m={m}, z={z}) not below eps={eps}",
                minimal=suggestion)
    if corpus is None:
        ids = enumerate_grid(context, m, z, cap=cap)
        per_player = (tuple(ids),) * context.structures[0].players
    else:
        qmap = quantize_corpus(context, m, z)
        players = context.structures[0].players
        per_player = []
        for i in range(players):
            seen = []
            for pt in corpus:
                chain = context.universe.chain(pt.ids[i])
                gid = qmap[chain[m - 1]]
                if gid not in seen:
                    seen.append(gid)
            per_player.append(tuple(seen))
        per_player = tuple(per_player)
    spec = GridSpec(m, z, per_player, context)
    if exclude and eps is not None:
        spec.kept_points = grid_points_outside(spec, exclude, eps)
    return spec


def _minimal_mz(eps, eta):
    for m in range(1, 64):
        if eta ** m / (1 - eta) < eps / 2:
            for z in range(1, 10_000):
                if series_bound(m, z, eta) < eps:
                    return (m, z)
    return None


def grid_points_outside(spec, exclude, eps):
    """Grid universal points whose distance to every excluded point is ≥ ε.

    This realizes the finite event G_ε ⊆ Ω ∖ N_ε(exclude): a point is kept
    only when the exclusion is certain (lower bound ≥ ε is not required by
    the construction; upper bound ≥ ε keeps the conservative reading).
    """
    ctx = spec.context
    out = []
    for pt in spec.points():
        keep = True
        for ex in exclude:
            if ctx.d_pi(pt, ex).upper < eps:
                keep = False
                break
        if keep:
            out.append(pt)
    return out


def quantize_corpus(context, m, z):
    """Level-by-level quantization map class-id -> grid-id over a whole context.

    Level-k beliefs are pushed through the level-(k-1) map, aggregated, and
    rounded (largest remainder).  Lower levels of a quantized hierarchy are
    derived marginals, so each image is a coherent grid hierarchy.
    """
    uni = context.universe
    exact = uni.exact
    qmap = {}
    # Collect ids used by any structure type, grouped by level.
    by_level = {}
    for key, ids in context.assign.items():
        for level, cid in enumerate(ids, start=1):
            by_level.setdefault(level, set()).add(cid)
    for level in range(1, m + 1):
        for cid in sorted(by_level.get(level, ())):
            items = uni.belief(cid)
            mapped = {}
            for (th, opp), w in items:
                opp_q = tuple(qmap[c] for c in opp) if level > 1 else ()
                key = (th, opp_q)
                mapped[key] = mapped.get(key, 0) + w
            atoms = sorted(mapped)
            rounded = round_to_grid([mapped[a] for a in atoms], z, exact=exact)
            belief = {a: _grid_value(v, exact)
                      for a, v in zip(atoms, rounded) if v}
            qmap[cid] = uni.intern(level, belief)
    return qmap


def quantized_point(context, qmap, point, m):
    ids = []
    for cid in point.ids:
        chain = context.universe.chain(cid)
        ids.append(qmap[chain[m - 1]])
    return UniversalPoint(point.state, tuple(ids), m, provenance="grid:" + point.provenance)


def own_series_distance(context, id_a, id_b, m=None):
    """Σ η^n dw_n along two hierarchies' chains; the per-player part of d_pi."""
    uni = context.universe
    ca, cb = uni.chain(id_a), uni.chain(id_b)
    m = m or min(len(ca), len(cb))
    total = context.zero()
    for n in range(1, m + 1):
        total = total + nm.npow(context.eta, n) * context.dw(ca[n - 1], cb[n - 1])
    return total


def own_max_series(context, pa, pb, m):
    """Truncated d_pi between two points plus the depth-m tail."""
    uni = context.universe
    total = 1 if pa.state != pb.state else context.zero()
    for n in range(1, m + 1):
        worst = context.zero()
        for ca, cb in zip(pa.ids, pb.ids):
            d = context.dw(uni.chain(ca)[n - 1], uni.chain(cb)[n - 1])
            if d > worst:
                worst = d
        total = total + nm.npow(context.eta, n) * worst
    return total + nm.npow(context.eta, m + 1) / (1 - context.eta)


# ---------------------------------------------------------------------------
# Scoring-rule reporting games
# ---------------------------------------------------------------------------


@dataclass
class ScoringGame:
    game: object
    depth: int
    resolution: int
    levels: list                # per-level grid id lists (shared by players)
    tuples: list                # report tuples (id per level); action k = tuples[k]
    context: MetricContext = field(repr=False)
    structure_slot: int = 0

    def nearest_report(self, player, type_idx):
        """Index of the d_Π-closest report tuple, with its series distance.

        The level-wise running max inside the d_Π series is minimized by the
        componentwise per-level argmin, so the nearest tuple is assembled one
        level at a time (ties break toward the smaller grid id).
        """
        ctx = self.context
        chain = ctx.universe.chain(
            ctx.assign[(self.structure_slot, player, type_idx)][self.depth - 1])
        picks = []
        for level in range(1, self.depth + 1):
            own = chain[level - 1]
            best, best_d = None, None
            for gid in self.levels[level - 1]:
                d = float(ctx.rho(own, gid))
                if best_d is None or d < best_d - 1e-12:
                    best, best_d = gid, d
            picks.append(best)
        idx = self.tuples.index(tuple(picks))
        eta = float(ctx.eta)
        dist, running = 0.0, 0.0
        for level in range(1, self.depth + 1):
            running = max(running, float(ctx.rho(chain[level - 1], picks[level - 1])))
            dist += eta ** level * running
        return idx, dist


def scoring_payoff(context, chains, i, th):
    """Quadratic-score payoff of player i's report tuple against realized cells.

    chains[j] is player j's reported chain of grid ids (levels 1..m); level n
    scores the reported level-n belief at the realized cell (θ for n = 1,
    (θ, opponents' level-(n-1) reports) above), minus its own square norm.
    """
    uni = context.universe
    total = context.zero()
    m = len(chains[i])
    players = len(chains)
    for n in range(1, m + 1):
        belief = dict(uni.belief(chains[i][n - 1]))
        if n == 1:
            cell = (th, ())
        else:
            opp = tuple(chains[j][n - 2] for j in range(players) if j != i)
            cell = (th, opp)
        lin = belief.get(cell, context.zero())
        quad = sum(w * w for w in belief.values())
        total = total + 2 * lin - quad
    return total


def scoring_game(structure, m, z, eta=None, context=None, cap=ACTION_CAP,
                 structure_slot=0):
    """The depth-m, resolution-z reporting game over per-level grid tuples.

    Actions are tuples of per-level grid beliefs (levels reported
    independently); each level carries its own quadratic score, so truthful
    (nearest-grid) reporting is pinned level by level under iterated
    elimination.
    """
    if context is None:
        context = MetricContext([structure], depth=max(m, 2), eta=eta)
    levels = enumerate_grid_levels(context, m, z, cap=cap)
    tuples = list(itertools.product(*levels))
    uni = context.universe
    exact = uni.exact
    zero = context.zero()

    # Precomputed score pieces: per grid id, the squared norm and the belief
    # lookup; the per-profile payoff is then a handful of dict reads.
    quad = {}
    lin = {}
    for ids in levels:
        for gid in ids:
            belief = dict(uni.belief(gid))
            lin[gid] = belief
            quad[gid] = sum(w * w for w in belief.values())

    def payoff(i, aprof, th):
        own = tuples[aprof[i]]
        total = zero
        for n in range(1, m + 1):
            gid = own[n - 1]
            if n == 1:
                cell = (th, ())
            else:
                opp = tuple(tuples[aprof[j]][n - 2]
                            for j in range(structure.players) if j != i)
                cell = (th, opp)
            total = total + 2 * lin[gid].get(cell, zero) - quad[gid]
        return total

    labels = [[f"g{k}" for k in range(len(tuples))]
              for _ in range(structure.players)]
    game = make_game(labels, structure.states, payoff, exact=exact,
                     name=f"scoring(m={m},z={z})")
    return ScoringGame(game, m, z, levels, tuples, context, structure_slot)


# ---------------------------------------------------------------------------
# Infection game (the necessity construction)
# ---------------------------------------------------------------------------


@dataclass
class InfectionGame:
    game: object
    context: MetricContext = field(repr=False)
    report_ids: tuple          # per player: grid ids used as report actions
    infected_reports: tuple    # per player: set of report indices in D̂_{P,i}
    forced_report: dict        # (slot, player, type_idx) -> report index
    a_star: int = 0            # index of a* within the binary component
    eps: float = 0.0

    def action_index(self, player, a0, report_idx):
        return a0 * len(self.report_ids[player]) + report_idx

    def truthful_profile(self, slot):
        """Pure profile: report own quantization; a** everywhere."""
        ctx = self.context
        s = ctx.structures[slot]
        prof = {}
        for i in range(s.players):
            for t in range(len(s.types[i])):
                rep = self.forced_report[(slot, i, t)]
                prof[(i, t)] = {self.action_index(i, 1, rep): 1
                                if s.exact else 1.0}
        return prof


def infection_game(p, q, eps, m, z, ack_params=None, context=None):
    """Assemble ĝ*: binary coordination on top of the reporting game.

    Requires d^ACK(p, q) ≥ eps (checked via the feasibility predicate; raises
    NotSeparated otherwise).  Action sets are {a*, a**} × (quantized corpus
    grid); payoffs add an ε bonus for a* on infected reports, a unit bonus
    for a* on uninfected reports when someone else plays a*, and nothing
    otherwise (the safe-default case).
    """
    from .ack import AckParams, feasibility_probe

    params = ack_params or AckParams()
    if context is None:
        context = MetricContext([p, q], depth=max(params.m_max, m), eta=params.eta)
    opt_ok, _, _ = feasibility_probe(p, q, eps, params, context=context)
    if opt_ok:
        raise NotSeparated(f"d_ACK(p, q) < {eps}; no infection game exists")

    qmap = quantize_corpus(context, m, z)
    players = p.players

    # The worst-case series bound is instance-independent and far too
    # conservative for corpus grids; record the measured quantization drift
    # instead.  The hard failure condition is checked after the infected
    # report set is known: without a bonus carrier the construction cannot
    # separate anything.
    drift = 0.0
    for slot in (0, 1):
        s = context.structures[slot]
        for skey in s.support:
            pt = context.point(slot, skey)
            qpt = quantized_point(context, qmap, pt, m)
            err = float(own_max_series(context, pt, qpt, m))
            drift = max(drift, err)

    # T̂_ε membership of P's support points (certain-in only).
    from .metric import in_eps_support

    def membership(slot):
        out = {}
        s = context.structures[slot]
        for skey in s.support:
            pt = context.point(slot, skey)
            own = in_eps_support(pt, context, slot, eps)
            oth = in_eps_support(pt, context, 1 - slot, eps)
            out[skey] = (own is True) and (oth is True)
        return out

    member_p = membership(0)

    # Reports: quantized per-player hierarchies across both supports.
    report_ids = [[] for _ in range(players)]
    forced = {}
    for slot in (0, 1):
        s = context.structures[slot]
        for i in range(players):
            for t in range(len(s.types[i])):
                top = context.assign[(slot, i, t)][m - 1]
                gid = qmap[top]
                if gid not in report_ids[i]:
                    report_ids[i].append(gid)
                forced[(slot, i, t)] = report_ids[i].index(gid)

    # D̂_{P,i}: report components of P-support points certainly outside T̂_ε.
    infected = [set() for _ in range(players)]
    for skey, inside in member_p.items():
        if inside:
            continue
        _, prof = skey
        for i in range(players):
            infected[i].add(forced[(0, i, prof[i])])
    # Remove any report also used by a T̂-certain P-point or any P'-point
    # (those must stay bonus-free for the all-a** equilibrium under P').
    protected = [set() for _ in range(players)]
    for skey, inside in member_p.items():
        if inside:
            _, prof = skey
            for i in range(players):
                protected[i].add(forced[(0, i, prof[i])])
    for i in range(players):
        for t in range(len(q.types[i])):
            protected[i].add(forced[(1, i, t)])
    infected = [inf - prot for inf, prot in zip(infected, protected)]
    if not any(infected):
        raise ResolutionTooCoarse(
            f"quantization at (m={m}, z={z}) left no report that separates the "
            f"excluded region (drift {drift:.4g}); refine the grid",
            minimal=_minimal_mz(float(eps), float(context.eta)))

    uni = context.universe
    chains = [{gid: uni.chain(gid) for gid in report_ids[i]} for i in range(players)]
    n_reports = [len(r) for r in report_ids]
    eps_val = eps if context.exact else float(eps)

    def payoff(i, aprof, th):
        a0 = [aprof[j] // n_reports[j] for j in range(players)]  # 0 = a*, 1 = a**
        rep = [aprof[j] % n_reports[j] for j in range(players)]
        ch = [chains[j][report_ids[j][rep[j]]] for j in range(players)]
        base = scoring_payoff(context, ch, i, th)
        if rep[i] in infected[i]:
            bonus = eps_val if a0[i] == 0 else 0
        elif any(a0[j] == 0 for j in range(players) if j != i):
            bonus = 1 if a0[i] == 0 else 0
        else:
            bonus = 0
        return base + bonus

    labels = [[f"{'a*' if a0 == 0 else 'a**'}|r{k}"
               for a0 in (0, 1) for k in range(n_reports[i])]
              for i in range(players)]
    game = make_game(labels, p.states, payoff, exact=context.exact,
                     name=f"infection(eps={eps},m={m},z={z})")
    return InfectionGame(game, context, tuple(tuple(r) for r in report_ids),
                         tuple(frozenset(s) for s in infected), forced,
                         a_star=0, eps=float(eps))


# ---------------------------------------------------------------------------
# Quantization to simple structures
# ---------------------------------------------------------------------------


def quantize_simple(structure, delta, eta=None, m=None, split_eps=None):
    """Stage 1: merge types by grid-quantized hierarchy (pushforward keeps μ
    exactly); stage 2: split residual first-order ties with a θ-tilted binary
    signal so every type has a distinct first-order belief.

    Returns (simple structure, report dict).
    """
    exact = structure.exact
    if eta is None:
        eta = Fraction(1, 2) if exact else 0.5
    eta_f = float(eta)
    if m is None:
        m = 1
        while eta_f ** m / (1 - eta_f) >= float(delta) / 2 and m < 60:
            m += 1
    tail = eta_f ** m / (1 - eta_f)
    if tail >= float(delta):
        raise ResolutionTooCoarse(
            f"depth-{m} series tail {tail:.4g} is not below delta={delta}",
            minimal=_minimal_mz(float(delta), eta_f))
    z = 1
    while series_bound(m, z, eta_f) > 0.9 * float(delta):
        z += 1
        if z > 10**6:
            raise ResolutionTooCoarse("no finite z meets the bound", minimal=None)

    context = MetricContext([structure], depth=m, eta=eta)
    qmap = quantize_corpus(context, m, z)

    # Merge types by quantized top-level id.
    merged_label = []
    for i in range(structure.players):
        groups = {}
        for t, label in enumerate(structure.types[i]):
            gid = qmap[context.assign[(0, i, t)][m - 1]]
            groups.setdefault(gid, []).append(label)
        rep = {gid: min(labels) for gid, labels in groups.items()}
        merged_label.append({label: rep[gid]
                             for gid, labels in groups.items() for label in labels})

    zero = structure.zero()
    merged_types = tuple(tuple(sorted(set(mlab.values()))) for mlab in merged_label)
    idx = [{t: k for k, t in enumerate(tl)} for tl in merged_types]
    merged_mass = {}
    for (th, prof), v in structure.mass.items():
        mp = tuple(idx[i][merged_label[i][structure.types[i][prof[i]]]]
                   for i in range(structure.players))
        merged_mass[(th, mp)] = merged_mass.get((th, mp), zero) + v
    merged = FiniteInformationStructure(structure.states, structure.prior,
                                        merged_types, merged_mass, exact,
                                        (structure.name or "P") + "/quantized")

    eps_prime = split_eps
    if eps_prime is None:
        eps_prime = (Fraction(delta).limit_denominator(10**9) / 10 if exact
                     else float(delta) / 10)
    out, splits = _split_first_order_ties(merged, eps_prime)
    report = {"m": m, "z": z, "eta": float(eta), "delta": float(delta),
              "split_eps": float(eps_prime), "splits": splits,
              "merged_types": [len(t) for t in merged_types],
              "final_types": [len(t) for t in out.types]}
    return out, report


def _split_first_order_ties(structure, eps_prime, max_retries=40):
    """Attach a θ-tilted binary signal to types sharing a first-order belief."""
    for attempt in range(max_retries):
        tilt = eps_prime / nm.npow(2, attempt)
        result = _try_split(structure, tilt)
        if result is not None:
            return result, {"tilt": float(tilt), "attempt": attempt}
    raise ResolutionTooCoarse("could not separate first-order ties", minimal=None)


def _try_split(structure, tilt):
    zero = structure.zero()
    one = Fraction(1) if structure.exact else 1.0
    half = one / 2

    plans = []  # per player: dict t_idx -> dict s in {0,1} -> (suffix, rho(s|θ) list)
    for i in range(structure.players):
        groups = {}
        for t in range(len(structure.types[i])):
            fo = structure.first_order(i, t)
            key = tuple(nm.quantize_key(v) for v in fo)
            groups.setdefault(key, []).append(t)
        plan = {}
        for key, members in groups.items():
            if len(members) == 1:
                continue
            fo = structure.first_order(i, members[0])
            tiltable = [k for k, v in enumerate(fo) if zero < v < 1]
            if not tiltable:
                return None  # degenerate tie: no state to tilt on
            th_star = tiltable[0]
            for rank, t in enumerate(members, start=1):
                d = tilt * rank / (4 * (len(members) + 1))
                rho1 = [half + d if th == th_star else half
                        for th in range(len(structure.states))]
                plan[t] = (th_star, rho1)
        plans.append(plan)

    new_types = []
    maps = []
    for i in range(structure.players):
        labels = []
        mapping = {}
        for t, label in enumerate(structure.types[i]):
            if t in plans[i]:
                mapping[t] = [(label + ".0", 0), (label + ".1", 1)]
                labels += [label + ".0", label + ".1"]
            else:
                mapping[t] = [(label, None)]
                labels.append(label)
        new_types.append(tuple(sorted(labels)))
        maps.append(mapping)
    idx = [{t: k for k, t in enumerate(tl)} for tl in new_types]

    mass = {}
    for (th, prof), v in structure.mass.items():
        options = []
        for i in range(structure.players):
            opts = []
            for label, s in maps[i][prof[i]]:
                if s is None:
                    w = one
                else:
                    rho1 = plans[i][prof[i]][1][th]
                    w = rho1 if s == 1 else one - rho1
                opts.append((idx[i][label], w))
            options.append(opts)
        for combo in itertools.product(*options):
            w = v
            for _, pw in combo:
                w = w * pw
            if w > zero:
                key = (th, tuple(c for c, _ in combo))
                mass[key] = mass.get(key, zero) + w

    out = FiniteInformationStructure(structure.states, structure.prior,
                                     tuple(new_types), mass, structure.exact,
                                     structure.name + "/simple" if structure.name else "")
    # Exact distinctness check; collisions force a smaller tilt.
    for i in range(out.players):
        seen = set()
        for t in range(len(out.types[i])):
            key = tuple(nm.quantize_key(v) for v in out.first_order(i, t))
            if key in seen:
                return None
            seen.add(key)
    return out


# ---------------------------------------------------------------------------
# Correlation embedding (BIBCE -> approximate BNE on a nearby simple structure)
# ---------------------------------------------------------------------------


@dataclass
class EmbedResult:
    structure: object
    profile: dict               # (player, type_idx) -> {action_idx: prob}
    certificate: dict


def embed_correlation(game, structure, rule, eps, split_eps=None, ack_params=None):
    """Encode a BIBCE's correlation into signals (a_i, τ_i), split ties, follow.

    The action component of each signal is the recommendation; following it
    is exactly obedient before the tie-splitting perturbation and ε-obedient
    after, with an unchanged induced outcome.
    """
    if len(structure.states) < 2:
        raise SingleStateUnsupported(
            "correlation cannot be embedded with a single payoff state")
    zero = structure.zero()

    sep = "::"
    labels = [set() for _ in range(structure.players)]
    entries = {}
    for (th, prof), v in structure.mass.items():
        row = rule.table[(th, prof)]
        for aprof, s in row.items():
            w = v * s
            if not w > zero:
                continue
            sig = tuple(f"{game.actions[i][aprof[i]]}{sep}{structure.types[i][prof[i]]}"
                        for i in range(structure.players))
            for i, lab in enumerate(sig):
                labels[i].add(lab)
            key = (structure.states[th], sig)
            entries[key] = entries.get(key, zero) + w
    encoded = validate_structure(
        (list(structure.states), list(structure.prior),
         [sorted(l) for l in labels], entries),
        exact=structure.exact, name=(structure.name or "P") + "/encoded")

    if split_eps is None:
        base = Fraction(eps) if structure.exact else float(eps)
        split_eps = base / (8 * max(1, int(math.ceil(game.m_of_u()))))
    simple, split_info = _split_first_order_ties(encoded, split_eps)

    profile = {}
    for i in range(simple.players):
        for t, label in enumerate(simple.types[i]):
            action_label = label.split(sep)[0]
            a_idx = game.actions[i].index(action_label)
            profile[(i, t)] = {a_idx: Fraction(1) if simple.exact else 1.0}

    from .ack import AckParams, ack_distance
    from .equilibrium import profile_rule, verify_bne

    ok, worst = verify_bne(game, simple, profile, eps)
    out_emb = _profile_outcome(game, simple, profile)
    from .core import induced_outcome
    nu_sigma = induced_outcome(structure, rule)
    gap = out_emb.distance2(nu_sigma)
    ackres = ack_distance(structure, simple, ack_params or AckParams())
    cert = {
        "bne_ok": bool(ok),
        "bne_margin": float(worst),
        "outcome_gap": float(gap),
        "ack_upper": float(ackres.upper),
        "split": split_info,
    }
    return EmbedResult(simple, profile, cert)


def _profile_outcome(game, structure, profile):
    from .core import induced_outcome
    from .equilibrium import profile_rule

    return induced_outcome(structure, profile_rule(game, structure, profile))


# ---------------------------------------------------------------------------
# Richness
# ---------------------------------------------------------------------------


@dataclass
class RichnessReport:
    rich: bool
    witnesses: dict            # action profile -> θ_a index
    strongly_rich: bool
    theta_star: object
    nash_completion: dict      # (player, action) -> opponent profile at θ*
    j_gap: object              # J_G > 0 when rich

    def require_rich(self):
        if not self.rich:
            raise NotRich("game is not rich: some profile has no anchor state")

    def require_strongly_rich(self):
        if not self.strongly_rich:
            raise NotStronglyRich("no state makes every action a strict NE component")


def richness_tools(game):
    """Exhaustive richness / strong-richness check with witnesses and J_G."""
    witnesses = {}
    j_gap = None
    for aprof in game.profiles():
        best_th = None
        for th in range(len(game.states)):
            ok = True
            gap_here = None
            for i in range(game.players):
                for a_dev in range(len(game.actions[i])):
                    if a_dev == aprof[i]:
                        continue
                    dev = aprof[:i] + (a_dev,) + aprof[i + 1:]
                    g = game.u(i, aprof, th) - game.u(i, dev, th)
                    if not g > 0:
                        ok = False
                        break
                    gap_here = g if gap_here is None else min(gap_here, g)
                if not ok:
                    break
            if ok:
                best_th = th
                break
        if best_th is None:
            rich = False
            witnesses = {}
            j_gap = None
            break
        witnesses[aprof] = best_th
        if gap_here is not None:
            j_gap = gap_here if j_gap is None else min(j_gap, gap_here)
    else:
        rich = True

    strongly_rich = False
    theta_star = None
    completion = {}
    for th in range(len(game.states)):
        all_ok = True
        comp = {}
        for i in range(game.players):
            for a_i in range(len(game.actions[i])):
                found = None
                for rest in itertools.product(*[range(len(game.actions[j]))
                                                for j in range(game.players) if j != i]):
                    aprof = _insert(i, a_i, rest, game.players)
                    if _is_strict_nash(game, aprof, th):
                        found = rest
                        break
                if found is None:
                    all_ok = False
                    break
                comp[(i, a_i)] = found
            if not all_ok:
                break
        if all_ok:
            strongly_rich = True
            theta_star = th
            completion = comp
            break
    return RichnessReport(rich, witnesses, strongly_rich, theta_star,
                          completion, j_gap)


def _insert(i, a_i, rest, players):
    out = []
    pos = 0
    for j in range(players):
        if j == i:
            out.append(a_i)
        else:
            out.append(rest[pos])
            pos += 1
    return tuple(out)


def _is_strict_nash(game, aprof, th):
    for i in range(game.players):
        for a_dev in range(len(game.actions[i])):
            if a_dev == aprof[i]:
                continue
            dev = aprof[:i] + (a_dev,) + aprof[i + 1:]
            if not game.u(i, aprof, th) - game.u(i, dev, th) > 0:
                return False
    return True


def strong_extension(game, structure, report, eps, eta2=None):
    """P⁺: anchor-type blocks making every ε-BIBCE extendable to exact BIBCE.

    For each player i and type τ_i the extension adds a fresh anchor profile
    t^{τ_i} = (t_j^{τ_i})_j; blocks: the original prior at weight (1-η)(1-δ),
    profiles (θ*, τ_i, t_{-i}^{τ_i}) at (1-η)δ/|I| each, and the all-anchor
    profiles (θ*, t^{τ_i}) at η/|I|, with δ = ε/(J_G + ε).  The displayed
    construction carries an extra μ(θ) factor that would break normalization,
    so block weights are used as totals directly.
    """
    report.require_strongly_rich()
    exact = structure.exact
    one = Fraction(1) if exact else 1.0
    j_gap = _strict_gap(game, report)
    eps_v = Fraction(eps) if exact else float(eps)
    delta = eps_v / (j_gap + eps_v)
    if eta2 is None:
        eta2 = delta / 2 if float(delta) > 0 else (Fraction(1, 100) if exact else 0.01)

    players = structure.players
    th_star = report.theta_star
    states = structure.states

    def anchor_label(i, t):
        return f"anchor{i}.{structure.types[i][t]}"

    anchor_labels = [(i, t) for i in range(players)
                     for t in range(len(structure.types[i]))]
    new_types = tuple(tuple(sorted(list(structure.types[j]) +
                                   [anchor_label(i, t) for i, t in anchor_labels]))
                      for j in range(players))
    idx = [{t: k for k, t in enumerate(tl)} for tl in new_types]
    zero = structure.zero()
    mass = {}

    scale_orig = (one - eta2) * (one - delta)
    for (th, prof), v in structure.mass.items():
        key = (th, tuple(idx[j][structure.types[j][prof[j]]] for j in range(players)))
        mass[key] = mass.get(key, zero) + scale_orig * v

    block_t = (one - eta2) * delta / players
    block_bar = eta2 / players
    for i, t in anchor_labels:
        w_src = structure.type_marginal(i, t)
        lab = anchor_label(i, t)
        prof_t = tuple(idx[j][structure.types[i][t]] if j == i else idx[j][lab]
                       for j in range(players))
        mass[(th_star, prof_t)] = mass.get((th_star, prof_t), zero) + block_t * w_src
        prof_bar = tuple(idx[j][lab] for j in range(players))
        mass[(th_star, prof_bar)] = mass.get((th_star, prof_bar), zero) + block_bar * w_src

    prior = [zero] * len(states)
    for (th, _), v in mass.items():
        prior[th] += v
    out = FiniteInformationStructure(states, tuple(prior), new_types,
                                     mass, exact,
                                     (structure.name or "P") + "/strong-rich")
    return out, {"delta": delta, "eta": eta2, "theta_star": th_star}


def _strict_gap(game, report):
    th = report.theta_star
    best = None
    for (i, a_i), rest in report.nash_completion.items():
        aprof = _insert(i, a_i, rest, game.players)
        for a_dev in range(len(game.actions[i])):
            if a_dev == a_i:
                continue
            dev = aprof[:i] + (a_dev,) + aprof[i + 1:]
            g = game.u(i, aprof, th) - game.u(i, dev, th)
            best = g if best is None else min(best, g)
    return best


def map_bibce_to_extension(game, structure, extension, report, rule):
    """σ⁺ on the strong extension: σ itself on original profiles; on an
    anchor block sourced from (i, τ_i), player i's marginal σ_i(·|τ_i) is
    drawn and everyone else plays its strict-NE completion at θ*."""
    players = structure.players
    ext = extension

    def parse(label):
        if label.startswith("anchor"):
            head, src_label = label.split(".", 1)
            return int(head[len("anchor"):]), src_label
        return None

    sigma_i = []
    for i in range(players):
        per_type = {}
        for t in range(len(structure.types[i])):
            dist = {}
            for (th, prof), row in rule.table.items():
                if prof[i] != t:
                    continue
                for aprof, v in row.items():
                    dist[aprof[i]] = dist.get(aprof[i], structure.zero()) + v
                break  # belief invariance: any support point carrying t works
            total = sum(dist.values())
            per_type[t] = {a: v / total for a, v in dist.items()}
        sigma_i.append(per_type)

    table = {}
    for (th, prof) in ext.support:
        labels = [ext.types[j][prof[j]] for j in range(players)]
        parsed = [parse(lbl) for lbl in labels]
        if all(p is None for p in parsed):
            oprof = tuple(structure.types[j].index(labels[j]) for j in range(players))
            table[(th, prof)] = dict(rule.table[(th, oprof)])
            continue
        anchors = [p for p in parsed if p is not None]
        src_i, src_label = anchors[0]
        src_t = structure.types[src_i].index(src_label)
        row = {}
        for a_i, w in sigma_i[src_i][src_t].items():
            rest = report.nash_completion[(src_i, a_i)]
            aprof = _insert(src_i, a_i, rest, players)
            row[aprof] = row.get(aprof, structure.zero()) + w
        table[(th, prof)] = row
    from .core import DecisionRule

    return DecisionRule(table)


# ---------------------------------------------------------------------------
# Email chains
# ---------------------------------------------------------------------------


def email_structure(n, q, mu=(0.12, 0.88), exact=False):
    """Message-chain structure truncated at n plus its common-knowledge companion.

    States: "a" (the chain-active state, prior mu[0]) and "b".  Positions
    j = 1..2n carry mass mu_a (1-q) q^{j-1}, renormalized over the truncated
    range so every type's conditional odds of the neighboring rung stay
    q : 1 regardless of n (no common-knowledge lump at the top).
    """
    if n < 1:
        raise ValidationError(["chain length must be >= 1"])
    qv = Fraction(q) if exact else float(q)
    if not 0 < float(qv) < 1:
        raise ValidationError(["continuation probability must be in (0,1)"])
    one = Fraction(1) if exact else 1.0
    mu_a = Fraction(mu[0]) if exact else float(mu[0])
    mu_b = Fraction(mu[1]) if exact else float(mu[1])
    if not nm.close(mu_a + mu_b, 1, nm.VALIDATION_TOL):
        raise ValidationError(["mu must sum to one"])

    width = len(str(n))

    def lab(k):
        return str(k).zfill(width)

    states = ["a", "b"]
    types = [[lab(k) for k in range(n + 1)] for _ in range(2)]
    norm = one - qv ** (2 * n)
    entries = {("b", (lab(0), lab(0))): mu_b}
    for j in range(1, 2 * n + 1):
        t1 = (j + 1) // 2
        t2 = j // 2
        w = mu_a * (one - qv) * qv ** (j - 1) / norm
        key = ("a", (lab(t1), lab(t2)))
        entries[key] = entries.get(key, 0) + w
    chain = validate_structure((states, [mu_a, mu_b], types, entries),
                               exact=exact, name=f"email-{n}")

    ck_entries = {("a", ("ca", "ca")): mu_a, ("b", ("cb", "cb")): mu_b}
    companion = validate_structure((states, [mu_a, mu_b],
                                    [["ca", "cb"], ["ca", "cb"]], ck_entries),
                                   exact=exact, name="email-ck")
    return chain, companion
