"""Domain types: information structures, base games, decision rules, outcomes.

An information structure here is a common-prior joint mass over states and
finite signal profiles.  Values are floats or Fractions (see `numerics`);
every operation preserves the arithmetic mode of its inputs.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction

from . import numerics as nm
from .errors import (
    DomainMismatch,
    ParseError,
    SchemaError,
    ValidationError,
    ZeroMassType,
)

FORMAT_TAG = "acklab/1"


def _sorted_types(labels):
    out = tuple(sorted(str(t) for t in labels))
    if len(set(out)) != len(out):
        raise SchemaError(f"duplicate type labels: {labels}")
    return out


@dataclass(frozen=True, eq=False)
class FiniteInformationStructure:
    """Joint probability mass over Θ × ∏ T_i with prior consistency.

    `mass` maps (state_index, profile) -> probability, where profile is a
    tuple of per-player type indices.  Only positive entries are stored; the
    key order of `support` is the canonical iteration order everywhere.
    """

    states: tuple
    prior: tuple
    types: tuple  # per player: tuple of type labels, lexicographically sorted
    mass: dict
    exact: bool
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def players(self):
        return len(self.types)

    @property
    def support(self):
        """Support points as a sorted tuple of (state_idx, profile) keys."""
        if "support" not in self._cache:
            self._cache["support"] = tuple(sorted(self.mass))
        return self._cache["support"]

    def zero(self):
        return Fraction(0) if self.exact else 0.0

    def p(self, state_idx, profile):
        return self.mass.get((state_idx, profile), self.zero())

    def type_marginal(self, i, t_idx):
        key = ("tm", i, t_idx)
        if key not in self._cache:
            total = self.zero()
            for (th, prof), v in self.mass.items():
                if prof[i] == t_idx:
                    total += v
            self._cache[key] = total
        return self._cache[key]

    def interim(self, i, t_idx):
        """Conditional p(θ, τ_{-i} | τ_i) as a dict keyed by (θ, opp_profile).

        opp_profile keeps the other players in player order with player i
        removed.  Raises ZeroMassType when τ_i has no mass.
        """
        key = ("in", i, t_idx)
        if key not in self._cache:
            denom = self.type_marginal(i, t_idx)
            if not denom > self.zero():
                label = (self.types[i][t_idx] if 0 <= t_idx < len(self.types[i])
                         else f"#{t_idx}")
                raise ZeroMassType(f"type {label!r} of player {i} has zero mass")
            cond = {}
            for (th, prof), v in self.mass.items():
                if prof[i] == t_idx:
                    opp = prof[:i] + prof[i + 1:]
                    cond[(th, opp)] = cond.get((th, opp), self.zero()) + v / denom
            self._cache[key] = cond
        return self._cache[key]

    def first_order(self, i, t_idx):
        """Marginal of the interim belief on Θ, as a tuple over states."""
        belief = [self.zero()] * len(self.states)
        for (th, _), v in self.interim(i, t_idx).items():
            belief[th] += v
        return tuple(belief)

    def profile_types(self, profile):
        return tuple(self.types[i][profile[i]] for i, _ in enumerate(profile))

    def describe(self):
        return {
            "states": list(self.states),
            "players": self.players,
            "types": [list(t) for t in self.types],
            "support_size": len(self.mass),
        }


def interim_beliefs(structure, player, type_label):
    """Public wrapper of `FiniteInformationStructure.interim` by label."""
    t_idx = structure.types[player].index(type_label)
    return structure.interim(player, t_idx)


def validate_structure(raw, exact=False, name=""):
    """Validate a raw description into a FiniteInformationStructure.

    `raw` is either a dict following the structure.json schema or a tuple
    (states, mu, types, mass_entries) where mass_entries maps
    (state_label, profile_of_labels) -> value.  All violated invariants are
    collected and reported together.
    """
    if isinstance(raw, FiniteInformationStructure):
        return raw
    if isinstance(raw, dict):
        states, mu, types, entries = _parse_structure_dict(raw, exact)
        name = name or raw.get("name", "")
    else:
        states, mu, types, entries = raw
        mu = list(mu)

    violations = []
    states = tuple(str(s) for s in states)
    if len(set(states)) != len(states):
        raise SchemaError("duplicate state labels")
    types = tuple(_sorted_types(tl) for tl in types)
    if len(types) < 1:
        raise SchemaError("at least one player required")
    state_index = {s: k for k, s in enumerate(states)}
    label_index = [{t: k for k, t in enumerate(tl)} for tl in types]

    zero = Fraction(0) if exact else 0.0
    mass = {}
    for (s_label, prof_labels), v in entries.items():
        if s_label not in state_index:
            raise SchemaError(f"unknown state {s_label!r}")
        if len(prof_labels) != len(types):
            raise SchemaError(f"profile {prof_labels!r} has wrong arity")
        prof = tuple(label_index[i][t] for i, t in enumerate(prof_labels))
        k = (state_index[s_label], prof)
        if v < zero:
            violations.append(f"NegativeMass: p{(s_label, prof_labels)} = {v}")
            continue
        if v > zero:
            mass[k] = mass.get(k, zero) + v

    total = sum(mass.values(), zero)
    if not nm.close(total, 1, nm.VALIDATION_TOL):
        violations.append(f"NotNormalized: total mass {total}")

    mu = tuple(mu)
    if len(mu) != len(states):
        raise SchemaError("mu length does not match states")
    marg = [zero] * len(states)
    for (th, _), v in mass.items():
        marg[th] += v
    for k, s in enumerate(states):
        if not nm.close(marg[k], mu[k], nm.VALIDATION_TOL):
            violations.append(f"PriorMismatch: marginal({s}) = {marg[k]} != mu = {mu[k]}")
        if not mu[k] > zero:
            violations.append(f"PriorMismatch: mu({s}) = {mu[k]} violates full support")

    for i, tl in enumerate(types):
        for k, t in enumerate(tl):
            tm = sum(v for (th, prof), v in mass.items() if prof[i] == k)
            if not tm > zero:
                violations.append(f"ZeroMassType: player {i} type {t!r}")

    if violations:
        raise ValidationError(violations)
    return FiniteInformationStructure(states, mu, types, mass, exact, name)


def _parse_structure_dict(raw, exact):
    try:
        states = list(raw["states"])
        mu = [nm.parse_number(v, exact) for v in raw["mu"]]
        types = [list(tl) for tl in raw["types"]]
        if "players" in raw and int(raw["players"]) != len(types):
            raise SchemaError("players field disagrees with types list")
        entries = {}
        for row in raw["mass"]:
            key = (str(row["state"]), tuple(str(t) for t in row["profile"]))
            entries[key] = entries.get(key, 0) + nm.parse_number(row["p"], exact)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad structure payload: {exc}") from exc
    return states, mu, types, entries


def structure_to_dict(structure):
    return {
        "format": FORMAT_TAG,
        "kind": "structure",
        "name": structure.name,
        "states": list(structure.states),
        "mu": [nm.format_number(v) for v in structure.prior],
        "players": structure.players,
        "types": [list(tl) for tl in structure.types],
        "mass": [
            {
                "state": structure.states[th],
                "profile": list(structure.profile_types(prof)),
                "p": nm.format_number(v),
            }
            for (th, prof), v in sorted(structure.mass.items())
        ],
    }


@dataclass(frozen=True, eq=False)
class BaseGame:
    """Finite action sets with bounded payoff tensors.

    `payoff` maps player -> dict[(action_profile, state_idx) -> value] with
    action profiles as tuples of per-player action indices.  `bound` is the
    exogenous M; `inferred_bound` records whether it was computed from the
    table rather than supplied.
    """

    actions: tuple  # per player: tuple of action labels
    states: tuple
    payoff: tuple   # per player: dict
    bound: object
    inferred_bound: bool = False
    name: str = ""

    @property
    def players(self):
        return len(self.actions)

    def profiles(self):
        return itertools.product(*[range(len(a)) for a in self.actions])

    def u(self, i, aprof, th):
        return self.payoff[i].get((aprof, th), 0)

    def m_of_u(self):
        """The constant M(u) = max{M, |A×Θ|} used by the sufficiency bound."""
        n_profiles = 1
        for a in self.actions:
            n_profiles *= len(a)
        return max(float(self.bound), float(n_profiles * len(self.states)))


def make_game(actions, states, payoff_fn, bound=None, exact=False, name=""):
    """Build a BaseGame from a callable payoff_fn(i, aprof, th)."""
    actions = tuple(tuple(a) for a in actions)
    states = tuple(states)
    payoff = []
    max_abs = 0
    for i in range(len(actions)):
        tbl = {}
        for aprof in itertools.product(*[range(len(a)) for a in actions]):
            for th in range(len(states)):
                v = payoff_fn(i, aprof, th)
                tbl[(aprof, th)] = v
                max_abs = max(max_abs, abs(float(v)))
        payoff.append(tbl)
    inferred = bound is None
    if bound is None:
        bound = Fraction(max_abs).limit_denominator(10**9) if exact else max_abs
        if not bound > 0:
            bound = Fraction(1) if exact else 1.0
    else:
        if max_abs > float(bound) + nm.VALIDATION_TOL:
            raise ValidationError([f"payoff magnitude {max_abs} exceeds bound {bound}"])
    for a in actions:
        if not a:
            raise ValidationError(["empty action set"])
    return BaseGame(actions, states, tuple(payoff), bound, inferred, name)


def load_game(raw, exact=False, name=""):
    """Parse the game.json schema."""
    try:
        actions = [list(a) for a in raw["actions"]]
        states = [str(s) for s in raw["states"]]
        bound = nm.parse_number(raw["M"], exact) if "M" in raw and raw["M"] is not None else None
        entries = {}
        for row in raw["payoffs"]:
            i = int(row["player"])
            prof = tuple(str(a) for a in row["profile"])
            entries[(i, prof, str(row["state"]))] = nm.parse_number(row["u"], exact)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad game payload: {exc}") from exc
    a_index = [{a: k for k, a in enumerate(al)} for al in actions]
    s_index = {s: k for k, s in enumerate(states)}

    def payoff_fn(i, aprof, th):
        prof_labels = tuple(actions[j][aprof[j]] for j in range(len(actions)))
        return entries.get((i, prof_labels, states[th]), 0)

    return make_game(actions, states, payoff_fn, bound=bound, exact=exact,
                     name=name or raw.get("name", ""))


def game_to_dict(game):
    rows = []
    for i in range(game.players):
        for (aprof, th), v in sorted(game.payoff[i].items()):
            rows.append({
                "player": i,
                "profile": [game.actions[j][aprof[j]] for j in range(game.players)],
                "state": game.states[th],
                "u": nm.format_number(v),
            })
    return {
        "format": FORMAT_TAG,
        "kind": "game",
        "name": game.name,
        "actions": [list(a) for a in game.actions],
        "states": list(game.states),
        "M": nm.format_number(game.bound),
        "inferred_M": game.inferred_bound,
        "payoffs": rows,
    }


@dataclass(frozen=True, eq=False)
class DecisionRule:
    """Conditional action distribution σ(a | θ, τ) on the support of a structure."""

    table: dict  # (state_idx, profile) -> dict[action_profile -> prob]

    def sigma(self, key):
        return self.table[key]

    def check_rows(self, tol=nm.ALGEBRA_TOL):
        bad = []
        for key, row in self.table.items():
            total = sum(row.values())
            if not nm.close(total, 1, tol):
                bad.append(f"NotNormalized: sigma row {key} sums to {total}")
            if any(v < 0 for v in row.values()):
                bad.append(f"NegativeMass: sigma row {key}")
        if bad:
            raise ValidationError(bad)

    def marginal(self, structure, i, t_idx, a_i):
        """σ_i(a_i | τ_i) from any support point carrying τ_i (belief invariance)."""
        for (th, prof), row in self.table.items():
            if prof[i] == t_idx:
                return sum(v for a, v in row.items() if a[i] == a_i)
        raise DomainMismatch(f"no support point with player {i} type index {t_idx}")

    def invariance_defect(self, structure, game):
        """Largest spread of σ_i(a_i | ·) across support points sharing τ_i."""
        worst = 0.0
        for i in range(structure.players):
            for a_i in range(len(game.actions[i])):
                per_type = {}
                for (th, prof), row in self.table.items():
                    m = sum(v for a, v in row.items() if a[i] == a_i)
                    per_type.setdefault(prof[i], []).append(float(m))
                for vals in per_type.values():
                    worst = max(worst, max(vals) - min(vals))
        return worst


@dataclass(frozen=True, eq=False)
class Outcome:
    """Joint distribution ν over action profiles and states."""

    dist: dict  # (action_profile, state_idx) -> prob

    def value(self, key):
        return self.dist.get(key, 0)

    def check(self, tol=nm.VALIDATION_TOL):
        total = sum(self.dist.values())
        bad = []
        if any(v < 0 for v in self.dist.values()):
            bad.append("NegativeMass: outcome")
        if not nm.close(total, 1, tol):
            bad.append(f"NotNormalized: outcome sums to {total}")
        if bad:
            raise ValidationError(bad)

    def distance2(self, other):
        keys = set(self.dist) | set(other.dist)
        total = 0.0
        for k in keys:
            d = float(self.value(k)) - float(other.value(k))
            total += d * d
        return total ** 0.5

    def expected(self, payoff_tbl):
        total = 0
        for (aprof, th), v in self.dist.items():
            total += v * payoff_tbl.get((aprof, th), 0)
        return total


def induced_outcome(structure, rule):
    """ν(a, θ) = Σ_τ p(θ, τ) σ(a | θ, τ)."""
    for key in structure.support:
        if key not in rule.table:
            raise DomainMismatch(f"decision rule missing support point {key}")
    dist = {}
    zero = structure.zero()
    for key in structure.support:
        th, _ = key
        pv = structure.mass[key]
        for a, s in rule.table[key].items():
            if s > 0:
                dist[(a, th)] = dist.get((a, th), zero) + pv * s
    out = Outcome(dist)
    out.check(nm.ALGEBRA_TOL)
    return out


def load_rule(raw, game, structure, exact=False):
    """Parse the rule.json schema into a DecisionRule on the structure's support.

    Rows: {"state": s, "profile": [...types...], "actions": {"a1,a2": p}}.
    """
    try:
        s_index = {s: k for k, s in enumerate(structure.states)}
        t_index = [{t: k for k, t in enumerate(tl)} for tl in structure.types]
        a_index = [{a: k for k, a in enumerate(al)} for al in game.actions]
        table = {}
        for row in raw["rows"]:
            th = s_index[str(row["state"])]
            prof = tuple(t_index[i][str(t)] for i, t in enumerate(row["profile"]))
            dist = {}
            for joint, p in row["actions"].items():
                labels = joint.split(",")
                aprof = tuple(a_index[i][lab] for i, lab in enumerate(labels))
                dist[aprof] = nm.parse_number(p, exact)
            table[(th, prof)] = dist
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad rule payload: {exc}") from exc
    rule = DecisionRule({k: v for k, v in table.items() if k in set(structure.support)})
    missing = [k for k in structure.support if k not in rule.table]
    if missing:
        raise DomainMismatch(f"rule missing {len(missing)} support points")
    rule.check_rows()
    return rule


def rule_to_dict(rule, game, structure, name=""):
    rows = []
    for (th, prof), dist in sorted(rule.table.items()):
        rows.append({
            "state": structure.states[th],
            "profile": list(structure.profile_types(prof)),
            "actions": {",".join(game.actions[i][a] for i, a in enumerate(aprof)):
                        nm.format_number(v) for aprof, v in sorted(dist.items())},
        })
    return {"format": FORMAT_TAG, "kind": "rule", "name": name,
            "action_labels": [list(a) for a in game.actions], "rows": rows}


def dump_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_json(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
