"""Grids, scoring games, infection games, quantization, embedding, richness."""

from fractions import Fraction as F

import pytest

from acklab.constructions import (
    build_grid,
    compositions,
    email_structure,
    embed_correlation,
    enumerate_grid,
    infection_game,
    map_bibce_to_extension,
    quantize_simple,
    richness_tools,
    round_to_grid,
    scoring_game,
    series_bound,
    strong_extension,
)
from acklab.ack import AckParams, ack_distance
from acklab.core import induced_outcome, make_game, validate_structure
from acklab.equilibrium import icr, rule_obedience_margins, solve_bibce, verify_bne
from acklab.errors import (
    InstanceTooLarge,
    NotSeparated,
    ResolutionTooCoarse,
    SingleStateUnsupported,
)
from acklab.hierarchy import is_simple
from acklab.metric import MetricContext

from conftest import complete_info, random_structure


def test_round_to_grid_deterministic_and_exact():
    assert round_to_grid([0.3, 0.7], 2) == [0.5, 0.5]
    assert round_to_grid([F(1, 3), F(2, 3)], 3, exact=True) == [F(1, 3), F(2, 3)]
    out = round_to_grid([0.25, 0.25, 0.5], 2)
    assert sum(out) == pytest.approx(1.0)


def test_compositions_count():
    assert len(list(compositions(2, 3))) == 6
    assert all(sum(c) == 2 for c in compositions(2, 3))


def test_grid_sizes_and_coherency(rng):
    s = random_structure(rng, n_states=2, n_types=(2, 2))
    ctx = MetricContext([s], depth=2)
    ids1 = enumerate_grid(ctx, 1, 2)
    assert len(ids1) == 3  # z=2 over two states
    ids2 = enumerate_grid(ctx, 2, 2)
    assert len(ids2) == 21
    # every grid element is coherent by construction: its chain marginals agree
    uni = ctx.universe
    for gid in ids2:
        chain = uni.chain(gid)
        assert len(chain) == 2
        marg = uni._marginalize(uni.belief(chain[1]))
        want = dict(uni.belief(chain[0]))
        for key in set(marg) | set(want):
            assert float(marg.get(key, 0)) == pytest.approx(float(want.get(key, 0)))


def test_grid_cap_raises(rng):
    s = random_structure(rng, n_states=2, n_types=(2, 2))
    ctx = MetricContext([s], depth=2)
    with pytest.raises(InstanceTooLarge):
        enumerate_grid(ctx, 2, 4, cap=200)


def test_build_grid_exclusion_partitions_lemma(rng):
    # GridPart at desk scale: grid points within eps certify non-membership
    s = random_structure(rng, n_states=2, n_types=(2, 2))
    ctx = MetricContext([s], depth=2, eta=0.5)
    eps = 0.95  # just above the series bound 0.9375 at (m=2, z=2, η=1/2)
    exclude = ctx.support_points(0)[:1]
    spec = build_grid(2, 2, exclude=exclude, eps=eps, context=ctx)
    assert spec.kept_points is not None
    for pt in spec.kept_points:
        for ex in exclude:
            assert float(ctx.d_pi(pt, ex).upper) >= eps
    # the second implication: points far from the excluded set see a nearby
    # grid element (checked on the structure's own support corpus)
    for pt in ctx.support_points(0):
        far = all(float(ctx.d_pi(pt, ex).lower) >= eps for ex in exclude)
        if far and spec.kept_points:
            near = min(float(ctx.d_pi(pt, g).lower) for g in spec.kept_points)
            assert near < eps


def test_build_grid_resolution_gate(rng):
    s = random_structure(rng, n_states=2, n_types=(2, 2))
    ctx = MetricContext([s], depth=2, eta=0.5)
    with pytest.raises(ResolutionTooCoarse) as err:
        build_grid(2, 2, exclude=ctx.support_points(0)[:1], eps=0.05, context=ctx)
    assert err.value.minimal is not None


def test_scoring_game_truthful_report_propriety(rng):
    # reporting the exact on-grid own belief weakly beats any other report
    s = random_structure(rng, n_states=2, n_types=(2, 2))
    sg = scoring_game(s, 1, 2)
    uni = sg.context.universe
    ids = sg.levels[0]
    for truth in ids:
        belief = dict(uni.belief(truth))

        # expected score of reporting r when the true first-order belief is `belief`
        def score(r):
            rb = dict(uni.belief(r))
            lin = sum(float(belief.get(atom, 0)) * 2 * float(w)
                      for atom, w in rb.items())
            quad = sum(float(w) ** 2 for w in rb.values())
            return lin - quad

        best = max(ids, key=score)
        assert score(best) <= score(truth) + 1e-12


def test_scoring_game_icr_unique_nearest_report(rng):
    s = random_structure(rng, n_states=2, n_types=(2, 2))
    sg = scoring_game(s, 1, 3)
    surv = icr(sg.game, s, 0.0)
    for (i, t), acts in surv.items():
        nearest, _ = sg.nearest_report(i, t)
        assert acts == [nearest]


def test_infection_game_not_separated(rng):
    s = random_structure(rng, n_states=2, n_types=(2, 2), mu=(0.5, 0.5))
    with pytest.raises(NotSeparated):
        infection_game(s, s, 0.1, 4, 2, AckParams(m_max=6, tol=5e-3))


def test_infection_game_email_pipeline():
    chain, ck = email_structure(4, 1 - 1 / 80, (0.12, 0.88))
    params = AckParams(m_max=8, tol=5e-3)
    ig = infection_game(chain, ck, 0.1, 6, 2, params)
    # infected reports carry the epsilon bonus and exist on the chain side
    assert any(ig.infected_reports[i] for i in range(2))
    # a* strictly dominant by eps for infected reporters: payoff table check
    g = ig.game
    nrep = [len(r) for r in ig.report_ids]
    for i in range(2):
        for rep in ig.infected_reports[i]:
            a_star = ig.action_index(i, 0, rep)
            a_dbl = ig.action_index(i, 1, rep)
            for other in range(len(g.actions[1 - i])):
                prof_star = (a_star, other) if i == 0 else (other, a_star)
                prof_dbl = (a_dbl, other) if i == 0 else (other, a_dbl)
                for th in range(2):
                    gap = float(g.u(i, prof_star, th)) - float(g.u(i, prof_dbl, th))
                    assert gap == pytest.approx(0.1)


def test_quantize_simple_merges_and_splits():
    # duplicate first-order beliefs with different continuations force a split
    states = ["s0", "s1"]
    types = [["x0", "x1"], ["y0", "y1"]]
    m = {("s0", ("x0", "y0")): F(2, 10), ("s1", ("x0", "y0")): F(2, 10),
         ("s0", ("x1", "y0")): F(3, 20), ("s1", ("x1", "y0")): F(1, 20),
         ("s0", ("x1", "y1")): F(1, 20), ("s1", ("x1", "y1")): F(3, 20),
         ("s0", ("x0", "y1")): F(1, 10), ("s1", ("x0", "y1")): F(1, 10)}
    p = validate_structure((states, [F(1, 2), F(1, 2)], types, m), exact=True)
    assert not is_simple(p)  # x0 and x1 share the first-order belief (1/2, 1/2)
    out, report = quantize_simple(p, F(1, 8))
    assert is_simple(out)
    assert out.prior == p.prior  # μ preserved exactly
    assert sum(out.mass.values()) == 1


def test_quantize_simple_identity_on_simple_on_grid():
    entries = {("s0", ("t0", "u0")): F(1, 2), ("s1", ("t1", "u1")): F(1, 2)}
    p = validate_structure((["s0", "s1"], [F(1, 2), F(1, 2)],
                            [["t0", "t1"], ["u0", "u1"]], entries), exact=True)
    out, report = quantize_simple(p, F(1, 4))
    assert [len(t) for t in out.types] == [2, 2]
    assert sorted(out.mass.values()) == sorted(p.mass.values())


def test_embed_correlation_certificate(rng):
    s = random_structure(rng, n_states=2, n_types=(2, 2))
    g = make_game([["A", "B"], ["A", "B"]], s.states,
                  lambda i, a, th: (2 if a[0] == a[1] == th else
                                    (1 if a[0] == a[1] else 0)), bound=2)
    _, rule, _, _ = solve_bibce(g, s, 0, objective={((0, 0), 0): 1.0})
    res = embed_correlation(g, s, rule, 0.05)
    assert is_simple(res.structure)
    assert res.certificate["bne_ok"]
    assert res.certificate["bne_margin"] <= 0.05 + 1e-9
    assert res.certificate["outcome_gap"] <= 0.05
    assert res.certificate["ack_upper"] <= 0.05 + 1e-9


def test_embed_rejects_single_state():
    s = complete_info()
    g = make_game([["A", "B"], ["A", "B"]], ["s"], lambda i, a, th: 0.0, bound=1)
    _, rule, _, _ = solve_bibce(g, s, 0)
    with pytest.raises(SingleStateUnsupported):
        embed_correlation(g, s, rule, 0.05)


def _rich_game():
    # One anchor state per action profile (own-component match pays) plus a
    # coordination state where every action belongs to a strict Nash pair.
    profiles = [(0, 0), (0, 1), (1, 0), (1, 1)]

    def u(i, a, th):
        if th < 4:
            return 2.0 if a[i] == profiles[th][i] else 0.0
        return 1.0 if a[0] == a[1] else 0.0

    states = [f"anchor{k}" for k in range(4)] + ["coord"]
    return make_game([["A", "B"], ["A", "B"]], states, u, bound=2)


def test_richness_detection():
    rep = richness_tools(_rich_game())
    assert rep.rich and rep.strongly_rich
    assert rep.j_gap is not None and float(rep.j_gap) > 0

    from conftest import complete_info  # noqa: F401 (symmetry with other tests)
    from acklab.corpus import matching_pennies

    rep2 = richness_tools(matching_pennies())
    assert not rep2.rich
    assert not rep2.strongly_rich


def test_strong_extension_maps_eps_bibce_to_exact(rng):
    g = _rich_game()
    s = random_structure(rng, states=g.states, n_types=(2, 2))
    rep = richness_tools(g)
    eps = 0.05
    _, rule, out, _ = solve_bibce(g, s, eps, objective={((0, 1), 0): 1.0},
                                  obedience="per-recommendation")
    ext, info = strong_extension(g, s, rep, eps)
    assert sum(float(v) for v in ext.mass.values()) == pytest.approx(1.0, abs=1e-9)
    plus = map_bibce_to_extension(g, s, ext, rep, rule)
    margins = rule_obedience_margins(g, ext, plus)
    assert min(float(v) for v in margins.values()) >= -1e-7  # exact BIBCE
    out_plus = induced_outcome(ext, plus)
    bound = 2 * float(g.bound) * len(list(g.profiles())) * len(g.states) * eps
    assert out.distance2(out_plus) < bound


def test_email_structure_shape_and_conditionals():
    chain, ck = email_structure(1, 0.5, (0.4, 0.6))
    assert [len(t) for t in chain.types] == [2, 2]
    assert [len(t) for t in ck.types] == [2, 2]
    for s in (chain, ck):
        assert float(sum(s.prior)) == pytest.approx(1.0)
    # closed-form chain conditionals: neighbor-rung odds are 1 : q
    chain, _ = email_structure(3, 0.5, (0.4, 0.6))
    t1 = chain.types[0].index("2")
    belief = chain.interim(0, t1)
    odds = {}
    for (th, opp), v in belief.items():
        odds[chain.types[1][opp[0]]] = float(v)
    assert odds["1"] / odds["2"] == pytest.approx(2.0)  # 1 : q with q = 1/2


def test_email_marginal_matches_mu_for_all_n():
    for n in (1, 2, 5):
        chain, _ = email_structure(n, 0.8, (0.3, 0.7))
        assert float(chain.prior[0]) == pytest.approx(0.3)
        assert float(chain.prior[1]) == pytest.approx(0.7)


def test_series_bound_monotone():
    assert series_bound(2, 2, 0.5) > series_bound(2, 8, 0.5)
    assert series_bound(2, 8, 0.5) > series_bound(6, 8, 0.5)
