"""Finite-order belief hierarchies, redundancy detection, and quotients.

Hierarchies are interned in a `HierarchyUniverse`: a level-k class id stands
for an equivalence class of signals whose beliefs agree up to level k.  Ids
are shared across structures (and with synthetic grid points), which is what
makes cross-structure metric computations and exact class comparisons work.

Level-k beliefs are stored over atoms ``(state_idx, opponent_class_profile)``
where the opponent profile lists the other players' level-(k-1) ids in player
order.  Level-1 beliefs use the empty opponent profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import numerics as nm
from .errors import DepthMismatch, ValidationError

ROOT = 0  # the unique level-0 class (*)


class HierarchyUniverse:
    """Intern table: canonical belief -> class id, with parent links."""

    def __init__(self, exact=False):
        self.exact = exact
        self._ids = {}      # canonical key -> id
        self._belief = {0: ()}
        self._parent = {0: None}
        self._level = {0: 0}
        self._next = 1

    def intern(self, level, belief_items, parent_hint=None):
        """Intern a level-k belief; belief_items is a dict atom -> weight.

        Atoms are (state_idx, opp_ids) with opp_ids a tuple of level-(k-1)
        ids.  Returns the class id.  The class parent (the same belief
        marginalized one level down) is derived unless supplied.
        """
        items = tuple(sorted((atom, w) for atom, w in belief_items.items() if w > 0))
        key = (level, tuple((atom, nm.quantize_key(w)) for atom, w in items))
        found = self._ids.get(key)
        if found is not None:
            return found
        new_id = self._next
        self._next += 1
        self._ids[key] = new_id
        self._belief[new_id] = items
        self._level[new_id] = level
        if parent_hint is None and level > 1:
            parent_hint = self.intern(level - 1, self._marginalize(items))
        self._parent[new_id] = parent_hint if level > 1 else ROOT
        return new_id

    def _marginalize(self, items):
        """Project a level-k belief onto (state, level-(k-2) opponent classes)."""
        out = {}
        for (th, opp), w in items:
            if opp and self._level[opp[0]] >= 2:
                opp_down = tuple(self._parent[c] for c in opp)
            else:
                opp_down = ()
            key = (th, opp_down)
            out[key] = out.get(key, 0) + w
        return out

    def belief(self, cid):
        return self._belief[cid]

    def level(self, cid):
        return self._level[cid]

    def parent(self, cid):
        return self._parent[cid]

    def chain(self, cid):
        """Ids along the parent chain from level 1 up to level(cid)."""
        out = []
        cur = cid
        while cur is not None and cur != ROOT:
            out.append(cur)
            cur = self._parent[cur]
        return list(reversed(out))


@dataclass(frozen=True)
class TruncatedHierarchy:
    """Per-type, level-by-level beliefs in canonical class-id form."""

    player: int
    depth: int
    class_ids: tuple
    universe: HierarchyUniverse = field(repr=False, compare=False, hash=False)

    def class_at(self, level):
        if not 1 <= level <= self.depth:
            raise DepthMismatch(f"level {level} outside depth {self.depth}")
        return self.class_ids[level - 1]

    def level_belief(self, level):
        return self.universe.belief(self.class_at(level))

    def top(self):
        return self.class_ids[-1]


def build_hierarchies(structures, depth, universe=None):
    """Compute per-type class ids for several structures in a shared universe.

    Returns (universe, assign) where assign[(s, i, t_idx)] is the list of
    class ids for levels 1..depth.  All structures must share the state list
    and player count.
    """
    if depth < 1:
        raise DepthMismatch("depth must be >= 1")
    structures = list(structures)
    base = structures[0]
    for s in structures[1:]:
        if s.states != base.states or s.players != base.players:
            raise ValidationError(["structures must share states and players to be compared"])
    if universe is None:
        universe = HierarchyUniverse(exact=all(s.exact for s in structures))

    assign = {(k, i, t): [] for k, s in enumerate(structures)
              for i in range(s.players) for t in range(len(s.types[i]))}
    for level in range(1, depth + 1):
        for k, s in enumerate(structures):
            for i in range(s.players):
                for t in range(len(s.types[i])):
                    belief = {}
                    for (th, opp_prof), w in s.interim(i, t).items():
                        if level == 1:
                            atom = (th, ())
                        else:
                            opp_ids = []
                            pos = 0
                            for j in range(s.players):
                                if j == i:
                                    continue
                                opp_ids.append(assign[(k, j, opp_prof[pos])][level - 2])
                                pos += 1
                            atom = (th, tuple(opp_ids))
                        belief[atom] = belief.get(atom, 0) + w
                    parent = assign[(k, i, t)][level - 2] if level > 1 else None
                    cid = universe.intern(level, belief, parent_hint=parent)
                    assign[(k, i, t)].append(cid)
    return universe, assign


def compute_hierarchies(structure, depth, universe=None):
    """Truncated hierarchies of every signal of one structure.

    Returns {player: {type_label: TruncatedHierarchy}}.
    """
    universe, assign = build_hierarchies([structure], depth, universe)
    out = {}
    for i in range(structure.players):
        per = {}
        for t, label in enumerate(structure.types[i]):
            per[label] = TruncatedHierarchy(i, depth, tuple(assign[(0, i, t)]), universe)
        out[i] = per
    return out


def check_coherency(h, tol=nm.ALGEBRA_TOL):
    """Level-k marginal onto level-(k-1) coordinates equals level k-1."""
    uni = h.universe
    for level in range(2, h.depth + 1):
        got = uni._marginalize(uni.belief(h.class_at(level)))
        want = dict(uni.belief(h.class_at(level - 1)))
        keys = set(got) | set(want)
        for key in keys:
            if not nm.close(got.get(key, 0), want.get(key, 0), tol):
                return False
    return True


def refinement_partitions(structure, max_depth=None):
    """Partition refinement by level; returns (partitions, fixpoint_depth).

    partitions[level][player] maps t_idx -> class id.  Stops as soon as no
    player's partition splits, which happens within the total signal count.
    """
    total = sum(len(tl) for tl in structure.types)
    cap = max_depth or total + 1
    universe, assign = build_hierarchies([structure], 1)
    parts = {1: [{t: assign[(0, i, t)][0] for t in range(len(structure.types[i]))}
                 for i in range(structure.players)]}
    sizes = [len(set(parts[1][i].values())) for i in range(structure.players)]
    depth = 1
    while depth < cap:
        depth += 1
        universe, assign = build_hierarchies([structure], depth, universe)
        parts[depth] = [{t: assign[(0, i, t)][depth - 1]
                         for t in range(len(structure.types[i]))}
                        for i in range(structure.players)]
        new_sizes = [len(set(parts[depth][i].values())) for i in range(structure.players)]
        if new_sizes == sizes:
            return parts, depth - 1
        sizes = new_sizes
    return parts, depth


def quotient(structure):
    """Merge redundant signals; returns (quotient structure, QuotientMap).

    Two signals merge iff their beliefs coincide at the refinement fixed
    point.  Exact comparison in rational mode; float mode may merge
    near-duplicates (documented behavior of the 1e-9 bucket).
    """
    from .core import FiniteInformationStructure

    parts, fix_depth = refinement_partitions(structure)
    final = parts[max(parts)]
    label_map = []
    rep_of_class = []
    for i in range(structure.players):
        classes = {}
        for t, label in enumerate(structure.types[i]):
            classes.setdefault(final[i][t], []).append(label)
        # Canonical quotient label: first member in lexicographic signal order.
        rep = {cid: min(labels) for cid, labels in classes.items()}
        label_map.append({lbl: rep[final[i][t]]
                          for t, lbl in enumerate(structure.types[i])})
        rep_of_class.append(rep)

    q_types = tuple(tuple(sorted(set(m.values()))) for m in label_map)
    q_index = [{t: k for k, t in enumerate(tl)} for tl in q_types]
    zero = structure.zero()
    q_mass = {}
    for (th, prof), v in structure.mass.items():
        q_prof = tuple(q_index[i][label_map[i][structure.types[i][prof[i]]]]
                       for i in range(structure.players))
        q_mass[(th, q_prof)] = q_mass.get((th, q_prof), zero) + v
    out = FiniteInformationStructure(structure.states, structure.prior,
                                     q_types, q_mass, structure.exact,
                                     structure.name + "/quotient" if structure.name else "")
    qmap = QuotientMap(tuple(label_map), fix_depth)
    return out, qmap


@dataclass(frozen=True)
class QuotientMap:
    """Per-player signal-label -> quotient-label maps, plus fixpoint depth."""

    maps: tuple
    depth: int

    def apply(self, player, label):
        return self.maps[player][label]

    def to_dict(self):
        return {"depth": self.depth,
                "maps": [dict(m) for m in self.maps]}


def is_simple(structure):
    """True iff every player's types have pairwise distinct first-order beliefs."""
    for i in range(structure.players):
        seen = set()
        for t in range(len(structure.types[i])):
            key = tuple(nm.quantize_key(v) for v in structure.first_order(i, t))
            if key in seen:
                return False
            seen.add(key)
    return True
