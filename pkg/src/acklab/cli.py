"""Command-line orchestration.

Exit codes: 0 success, 1 error, 2 honest indeterminacy (the requested
decision needs a larger truncation depth).  With a fixed argument vector
(including --seed) output bytes are identical across runs; all defaults are
echoed into output headers.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

from . import numerics as nm
from .ack import AckParams, ack_distance, dfg_distance, weak_exante_distance
from .belief import bp, cp, infection_chain
from .constructions import (
    email_structure,
    embed_correlation,
    infection_game,
    quantize_simple,
    scoring_game,
)
from .core import (
    dump_json,
    game_to_dict,
    load_game,
    load_rule,
    read_json,
    rule_to_dict,
    structure_to_dict,
    validate_structure,
)
from .corpus import corpus_emit, corpus_list
from .equilibrium import (
    OBEDIENCE_PER_REC,
    OBEDIENCE_SLICE,
    OutcomePolytope,
    bne_search_tiny,
    design_extremes,
    dstar_lower_certificate,
    icr,
    icr_restriction,
    profile_rule,
    rule_obedience_margins,
    solve_bibce,
    strategic_distance,
    value_distance,
)
from .errors import AcklabError, IndeterminateDominated, ValidationError
from .hierarchy import compute_hierarchies, quotient
from .metric import MetricContext

EXIT_OK, EXIT_ERROR, EXIT_INDET = 0, 1, 2


def _mode(args):
    mode = args.mode or os.environ.get("ACKLAB_MODE", "float")
    if mode not in ("float", "rational"):
        raise ValidationError([f"unknown mode {mode!r}"])
    return mode == "rational"


def _params(args, exact):
    eta = None
    if args.eta is not None:
        eta = Fraction(args.eta).limit_denominator(10**6) if exact else float(args.eta)
    return AckParams(eta=eta, m_max=args.depth, tol=args.tol)


def _config_echo(args):
    skip = {"func", "out"}
    return {k: v for k, v in sorted(vars(args).items())
            if k not in skip and not callable(v)}


def _emit(args, payload):
    payload = {"format": "acklab/1", "config": _config_echo(args), **payload}
    text = dump_json(payload, args.out if args.out != "-" else None)
    if args.out == "-":
        sys.stdout.write(text)


def _emit_csv(args, header_pairs, columns, rows):
    lines = [f"# {k}={v}" for k, v in header_pairs]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)


def _load_structure(path, exact):
    return validate_structure(read_json(path), exact=exact)


def _interval_payload(res):
    out = {"lower": float(res.lower), "upper": float(res.upper)}
    if hasattr(res, "trace"):
        out["trace"] = res.trace
    return out


def _event_from_arg(structure, arg):
    idx = [int(v) for v in arg.split(",")] if arg else []
    support = structure.support
    return frozenset(support[k] for k in idx)


def cmd_validate(args):
    exact = _mode(args)
    s = _load_structure(args.structure, exact)
    _emit(args, {"result": "valid", "structure": structure_to_dict(s)})
    return EXIT_OK


def cmd_hierarchy(args):
    exact = _mode(args)
    s = _load_structure(args.structure, exact)
    hs = compute_hierarchies(s, args.hdepth)
    payload = {}
    for i, per in hs.items():
        for label, h in per.items():
            levels = []
            for level in range(1, h.depth + 1):
                belief = [{"state": s.states[atom[0]],
                           "opponents": list(atom[1]),
                           "p": nm.format_number(w)}
                          for atom, w in h.level_belief(level)]
                levels.append({"class_id": h.class_at(level), "belief": belief})
            payload[f"{i}:{label}"] = levels
    _emit(args, {"hierarchies": payload})
    return EXIT_OK


def cmd_quotient(args):
    exact = _mode(args)
    s = _load_structure(args.structure, exact)
    q, qmap = quotient(s)
    _emit(args, {"structure": structure_to_dict(q), "map": qmap.to_dict()})
    return EXIT_OK


def cmd_dpi(args):
    exact = _mode(args)
    a = _load_structure(args.structure, exact)
    b = _load_structure(args.other, exact)
    params = _params(args, exact)
    ctx = MetricContext([a, b], depth=params.m_max, eta=params.eta)
    pts_a = ctx.support_points(0)
    pts_b = ctx.support_points(1)
    matrix = []
    for pa in pts_a:
        row = []
        for pb in pts_b:
            d = ctx.d_pi(pa, pb)
            row.append({"lower": float(d.lower), "upper": float(d.upper)})
        matrix.append(row)
    _emit(args, {"rows": [p.provenance for p in pts_a],
                 "cols": [p.provenance for p in pts_b],
                 "matrix": matrix})
    return EXIT_OK


def cmd_bp(args):
    exact = _mode(args)
    s = _load_structure(args.structure, exact)
    event = _event_from_arg(s, args.event)
    op = cp if args.common else bp
    result = op(s, event, nm.parse_number(args.p, exact))
    support = list(s.support)
    _emit(args, {"indices": sorted(support.index(k) for k in result)})
    return EXIT_OK


def cmd_infect(args):
    exact = _mode(args)
    s = _load_structure(args.structure, exact)
    event = _event_from_arg(s, args.event)
    chain = infection_chain(s, event, nm.parse_number(args.eps, exact))
    support = list(s.support)
    _emit(args, {"chain": [sorted(support.index(k) for k in ev) for ev in chain],
                 "union": sorted(support.index(k) for k in chain[-1])})
    return EXIT_OK


def _distance_cmd(args, fn):
    exact = _mode(args)
    a = _load_structure(args.structure, exact)
    b = _load_structure(args.other, exact)
    res = fn(a, b, _params(args, exact))
    if args.trace_csv:
        rows = [(t["eps"], t["branch"], t["mass_p"], t["mass_q"], t["feasible"])
                for t in res.trace]
        with open(args.trace_csv, "w") as fh:
            fh.write("eps,branch,mass_p,mass_q,feasible\n")
            for row in rows:
                fh.write(",".join(str(v) for v in row) + "\n")
    _emit(args, _interval_payload(res))
    return EXIT_OK


def cmd_ack(args):
    return _distance_cmd(args, ack_distance)


def cmd_dfg(args):
    return _distance_cmd(args, dfg_distance)


def cmd_weak(args):
    def fn(a, b, params):
        params.metric = args.interim
        params.tv_depth = args.tv_depth
        return weak_exante_distance(a, b, params)
    return _distance_cmd(args, fn)


def cmd_bibce(args):
    exact = _mode(args)
    s = _load_structure(args.structure, exact)
    g = load_game(read_json(args.game), exact=exact)
    objective = None
    if args.objective:
        raw = read_json(args.objective)
        objective = _designer_table(raw, g, exact)
    obedience = OBEDIENCE_PER_REC if args.per_recommendation else OBEDIENCE_SLICE
    _, rule, outcome, value = solve_bibce(g, s, nm.parse_number(args.eps, exact),
                                          objective=objective, obedience=obedience)
    payload = {
        "value": None if value is None else float(value),
        "sigma": rule_to_dict(rule, g, s),
        "outcome": [{"actions": [g.actions[i][a] for i, a in enumerate(aprof)],
                     "state": g.states[th], "p": nm.format_number(v)}
                    for (aprof, th), v in sorted(outcome.dist.items())],
    }
    _emit(args, payload)
    return EXIT_OK


def _designer_table(raw, game, exact):
    a_index = [{a: k for k, a in enumerate(al)} for al in game.actions]
    s_index = {s: k for k, s in enumerate(game.states)}
    table = {}
    for row in raw["entries"]:
        aprof = tuple(a_index[i][str(a)] for i, a in enumerate(row["profile"]))
        table[(aprof, s_index[str(row["state"])])] = nm.parse_number(row["u"], exact)
    return table


def cmd_icr(args):
    exact = _mode(args)
    s = _load_structure(args.structure, exact)
    g = load_game(read_json(args.game), exact=exact)
    surv = icr(g, s, nm.parse_number(args.eps, exact))
    payload = {f"{i}:{s.types[i][t]}": [g.actions[i][a] for a in acts]
               for (i, t), acts in sorted(surv.items())}
    _emit(args, {"survivors": payload})
    return EXIT_OK


def cmd_bne(args):
    exact = _mode(args)
    s = _load_structure(args.structure, exact)
    g = load_game(read_json(args.game), exact=exact)
    profiles = bne_search_tiny(g, s, nm.parse_number(args.eps, exact))
    payload = []
    for prof in profiles:
        payload.append({f"{i}:{s.types[i][t]}":
                        {g.actions[i][a]: nm.format_number(v) for a, v in dist.items()}
                        for (i, t), dist in sorted(prof.items())})
    _emit(args, {"count": len(payload), "profiles": payload})
    return EXIT_OK


def cmd_dstar(args):
    exact = _mode(args)
    a = _load_structure(args.structure, exact)
    b = _load_structure(args.other, exact)
    g = load_game(read_json(args.game), exact=exact)
    res = strategic_distance(g, a, b, tol=args.tol, n_directions=args.directions,
                             seed=args.seed)
    _emit(args, {"lower": float(res.lower), "upper": float(res.upper),
                 "sampling_gap": res.sampling_gap})
    return EXIT_OK


def cmd_dvalue(args):
    exact = _mode(args)
    a = _load_structure(args.structure, exact)
    b = _load_structure(args.other, exact)
    g = load_game(read_json(args.game), exact=exact)
    res = value_distance(g, a, b, tol=args.tol, n_directions=args.directions,
                         seed=args.seed)
    _emit(args, {"lower": float(res.lower), "upper": float(res.upper)})
    return EXIT_OK


def cmd_design(args):
    exact = _mode(args)
    s = _load_structure(args.structure, exact)
    g = load_game(read_json(args.game), exact=exact)
    designer = _designer_table(read_json(args.objective), g, exact)
    vmax, vmin = design_extremes(g, s, designer)
    _emit(args, {"v_max": float(vmax), "v_min": float(vmin)})
    return EXIT_OK


def cmd_quantize(args):
    exact = _mode(args)
    s = _load_structure(args.structure, exact)
    delta = nm.parse_number(args.delta, exact)
    out, report = quantize_simple(s, delta)
    _emit(args, {"structure": structure_to_dict(out), "report": report})
    return EXIT_OK


def cmd_embed(args):
    exact = _mode(args)
    s = _load_structure(args.structure, exact)
    g = load_game(read_json(args.game), exact=exact)
    eps = nm.parse_number(args.eps, exact)
    if args.sigma:
        rule = load_rule(read_json(args.sigma), g, s, exact=exact)
    else:
        _, rule, _, _ = solve_bibce(g, s, 0)
    res = embed_correlation(g, s, rule, eps)
    payload = {
        "structure": structure_to_dict(res.structure),
        "profile": {f"{i}:{res.structure.types[i][t]}":
                    {g.actions[i][a]: nm.format_number(v) for a, v in d.items()}
                    for (i, t), d in sorted(res.profile.items())},
        "certificate": res.certificate,
    }
    _emit(args, payload)
    return EXIT_OK


def cmd_make(args):
    exact = _mode(args)
    if args.what == "email":
        chain, ck = email_structure(args.n, nm.parse_number(args.q, exact),
                                    exact=exact)
        _emit(args, {"chain": structure_to_dict(chain),
                     "companion": structure_to_dict(ck)})
        return EXIT_OK
    if args.what == "scoring":
        s = _load_structure(args.structure, exact)
        sg = scoring_game(s, args.m, args.z)
        _emit(args, {"game": game_to_dict(sg.game)})
        return EXIT_OK
    if args.what == "infection":
        a = _load_structure(args.structure, exact)
        b = _load_structure(args.other, exact)
        params = _params(args, exact)
        ig = infection_game(a, b, nm.parse_number(args.eps, exact),
                            args.m, args.z, params)
        _emit(args, {"game": game_to_dict(ig.game),
                     "infected_reports": [sorted(x) for x in ig.infected_reports]})
        return EXIT_OK
    raise ValidationError([f"unknown make target {args.what!r}"])


def cmd_sweep(args):
    exact = _mode(args)
    if args.what != "email":
        raise ValidationError(["only the email sweep is bundled"])
    lo, hi = (int(v) for v in args.n_range.split(".."))
    params = _params(args, exact)
    rows = []
    for n in range(lo, hi + 1):
        q = args.q if args.q is not None else 1 - 1 / (20 * n)
        chain, ck = email_structure(n, q, exact=exact)
        ares = ack_distance(chain, ck, params)
        wres = weak_exante_distance(chain, ck, params)
        row = [n, q, float(ares.lower), float(ares.upper),
               float(wres.lower), float(wres.upper)]
        if args.game:
            g = load_game(read_json(args.game), exact=exact)
            d = strategic_distance(g, chain, ck, tol=args.tol,
                                   n_directions=args.directions, seed=args.seed)
            row += [float(d.lower), float(d.upper)]
        rows.append(row)
    cols = ["n", "q", "ack_lower", "ack_upper", "weak_lower", "weak_upper"]
    if args.game:
        cols += ["dstar_lower", "dstar_upper"]
    _emit_csv(args, sorted(_config_echo(args).items()), cols, rows)
    return EXIT_OK


def cmd_corpus(args):
    if args.action == "list":
        _emit(args, corpus_list())
        return EXIT_OK
    _emit(args, corpus_emit(args.name))
    return EXIT_OK


def build_parser():
    top = argparse.ArgumentParser(prog="acklab")
    top.add_argument("--mode", choices=["float", "rational"], default=None,
                     help="arithmetic mode (default: ACKLAB_MODE or float)")
    sub = top.add_subparsers(dest="command", required=True)

    def common(p, other=False, game=False):
        p.add_argument("structure")
        if other:
            p.add_argument("other")
        if game:
            p.add_argument("--game", required=True)
        p.add_argument("--eta", default=None)
        p.add_argument("--depth", type=int, default=8)
        p.add_argument("--tol", type=float, default=1e-3)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="-")

    p = sub.add_parser("validate")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("hierarchy")
    common(p)
    p.add_argument("--hdepth", type=int, default=3)
    p.set_defaults(func=cmd_hierarchy)

    p = sub.add_parser("quotient")
    common(p)
    p.set_defaults(func=cmd_quotient)

    p = sub.add_parser("dpi")
    common(p, other=True)
    p.set_defaults(func=cmd_dpi)

    for name, is_common in (("bp", False), ("cp", True)):
        p = sub.add_parser(name)
        common(p)
        p.add_argument("--event", required=True,
                       help="comma-separated support indices")
        p.add_argument("--p", required=True)
        p.set_defaults(func=cmd_bp, common=is_common)

    p = sub.add_parser("infect")
    common(p)
    p.add_argument("--event", required=True)
    p.add_argument("--eps", required=True)
    p.set_defaults(func=cmd_infect)

    for name, fn in (("ack", cmd_ack), ("dfg", cmd_dfg), ("weak", cmd_weak)):
        p = sub.add_parser(name)
        common(p, other=True)
        p.add_argument("--trace-csv", default=None)
        if name == "weak":
            p.add_argument("--interim", choices=["dpi", "tv"], default="dpi")
            p.add_argument("--tv-depth", type=int, default=2)
        p.set_defaults(func=fn)

    p = sub.add_parser("bibce")
    common(p, game=True)
    p.add_argument("--eps", default="0")
    p.add_argument("--objective", default=None)
    p.add_argument("--per-recommendation", action="store_true")
    p.set_defaults(func=cmd_bibce)

    p = sub.add_parser("icr")
    common(p, game=True)
    p.add_argument("--eps", default="0")
    p.set_defaults(func=cmd_icr)

    p = sub.add_parser("bne")
    common(p, game=True)
    p.add_argument("--eps", default="0")
    p.set_defaults(func=cmd_bne)

    p = sub.add_parser("dstar")
    common(p, other=True, game=True)
    p.add_argument("--directions", type=int, default=64)
    p.set_defaults(func=cmd_dstar)

    p = sub.add_parser("dvalue")
    common(p, other=True, game=True)
    p.add_argument("--directions", type=int, default=64)
    p.set_defaults(func=cmd_dvalue)

    p = sub.add_parser("design")
    common(p, game=True)
    p.add_argument("--objective", required=True)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("quantize")
    common(p)
    p.add_argument("--delta", required=True)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("embed")
    common(p, game=True)
    p.add_argument("--eps", default="0.05")
    p.add_argument("--sigma", default=None)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("make")
    p.add_argument("what", choices=["email", "scoring", "infection"])
    p.add_argument("--structure", default=None)
    p.add_argument("--other", default=None)
    p.add_argument("--n", type=int, default=5)
    p.add_argument("--q", default="0.9")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--z", type=int, default=2)
    p.add_argument("--eps", default="0.1")
    p.add_argument("--eta", default=None)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_make)

    p = sub.add_parser("sweep")
    p.add_argument("what", choices=["email"])
    p.add_argument("--n-range", default="1..10")
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--game", default=None)
    p.add_argument("--directions", type=int, default=16)
    p.add_argument("--eta", default=None)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("corpus")
    p.add_argument("action", choices=["list", "emit"])
    p.add_argument("name", nargs="?", default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_corpus)

    return top


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IndeterminateDominated as exc:
        print(f"indeterminate: {exc}", file=sys.stderr)
        return EXIT_INDET
    except AcklabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
