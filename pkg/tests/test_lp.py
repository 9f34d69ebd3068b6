"""Bundled simplex: agreement with HiGHS, exact pivoting, duality gaps."""

from fractions import Fraction as F

import numpy as np
import pytest

from acklab.lp import solve_lp
from acklab.transport import total_variation, wasserstein1


def _random_feasible_lp(rng):
    n = int(rng.integers(2, 7))
    m_eq = int(rng.integers(0, 3))
    m_ub = int(rng.integers(1, 5))
    c = rng.normal(size=n)
    a_ub = rng.normal(size=(m_ub, n))
    a_eq = rng.normal(size=(m_eq, n)) if m_eq else None
    x0 = rng.uniform(0, 1, size=n)
    b_eq = (a_eq @ x0).tolist() if m_eq else None
    b_ub = (np.maximum(a_ub @ x0, 0) + rng.uniform(0.5, 2.0, size=m_ub)).tolist()
    return c, a_eq, b_eq, a_ub, b_ub


def test_bundled_matches_highs_on_random_instances():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(120):
        c, a_eq, b_eq, a_ub, b_ub = _random_feasible_lp(rng)
        ref = solve_lp(c, a_eq=a_eq.tolist() if a_eq is not None else None,
                       b_eq=b_eq, a_ub=a_ub.tolist(), b_ub=b_ub, solver="highs")
        mine = solve_lp(c, a_eq=a_eq.tolist() if a_eq is not None else None,
                        b_eq=b_eq, a_ub=a_ub.tolist(), b_ub=b_ub, solver="bundled")
        assert mine.status == ref.status
        if ref.status == "optimal":
            assert mine.value == pytest.approx(ref.value, abs=1e-7)
            checked += 1
    assert checked > 50


def test_duality_gap_zero_at_optimum():
    rng = np.random.default_rng(11)
    for _ in range(60):
        c, a_eq, b_eq, a_ub, b_ub = _random_feasible_lp(rng)
        res = solve_lp(c, a_eq=a_eq.tolist() if a_eq is not None else None,
                       b_eq=b_eq, a_ub=a_ub.tolist(), b_ub=b_ub, solver="bundled")
        if res.status != "optimal":
            continue
        gap = abs(res.dual_value(b_eq or [], b_ub) - res.value)
        assert gap <= 1e-9 * max(1.0, abs(res.value))


def test_exact_mode_small_lp():
    res = solve_lp([F(-1), F(-2)], a_ub=[[1, 1], [1, 0]],
                   b_ub=[F(1), F(1, 2)], exact=True)
    assert res.status == "optimal"
    assert res.value == F(-2)
    assert res.x == [F(0), F(1)]
    assert res.dual_value([], [F(1), F(1, 2)]) == F(-2)


def test_infeasible_and_unbounded_detection():
    res = solve_lp([1.0], a_eq=[[1.0]], b_eq=[2.0], a_ub=[[1.0]], b_ub=[1.0])
    assert res.status == "infeasible"
    res = solve_lp([-1.0], a_ub=[[-1.0]], b_ub=[1.0])
    assert res.status == "unbounded"


def test_wasserstein_trivia():
    # equal beliefs
    assert wasserstein1([0.5, 0.5], [0.5, 0.5], [[0, 1], [1, 0]]) == 0
    # point masses at ground distance 1 transport one unit of mass
    assert wasserstein1([1.0, 0.0], [0.0, 1.0], [[0, 1], [1, 0]]) == pytest.approx(1.0)
    # the 2-atom example solvable by hand
    val = wasserstein1([0.6, 0.4], [0.5, 0.5], [[0, 1], [1, 0]])
    assert val == pytest.approx(0.1)
    # exact mode
    val = wasserstein1([F(3, 5), F(2, 5)], [F(1, 2), F(1, 2)],
                       [[F(0), F(1)], [F(1), F(0)]], exact=True)
    assert val == F(1, 10)


def test_wasserstein_capped_by_tv():
    rng = np.random.default_rng(5)
    for _ in range(40):
        k = int(rng.integers(2, 6))
        p = rng.dirichlet(np.ones(k)).tolist()
        q = rng.dirichlet(np.ones(k)).tolist()
        cost = rng.uniform(0, 1, size=(k, k))
        cost = (cost + cost.T) / 2
        np.fill_diagonal(cost, 0.0)
        w = wasserstein1(p, q, cost.tolist())
        assert w <= total_variation(p, q) + 1e-9
        assert w >= -1e-12
