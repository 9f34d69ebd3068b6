"""Linear programming backends.

The bundled solver is a dense two-phase tableau simplex: Dantzig pricing with
a Bland fallback after degenerate stalls, deterministic tie-breaking, and two
code paths sharing one tableau layout: float64 (vectorized) and Fraction
(exact pivoting).  It is the solver of record for small instances and for
rational mode.

Instances produced by the necessity pipeline (grid games over long chains)
are far from tiny, so float-mode solves above a size threshold are delegated
to scipy's HiGHS, which is deterministic for a fixed input.  The test suite
cross-checks the two backends on small instances.

Conventions: minimize ``c @ x`` subject to ``A_eq x = b_eq``,
``A_ub x <= b_ub`` and ``x >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import Infeasible, LPNumericalFailure, Unbounded

PIVOT_TOL = 1e-9
BUNDLED_CELL_LIMIT = 20_000  # tableau cells above which float solves go to HiGHS


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: list = field(default_factory=list)
    value: object = None
    duals_eq: list = field(default_factory=list)
    duals_ub: list = field(default_factory=list)

    def dual_value(self, b_eq=(), b_ub=()):
        total = 0
        for y, b in zip(self.duals_eq, b_eq):
            total += y * b
        for y, b in zip(self.duals_ub, b_ub):
            total += y * b
        return total


def _as_rows(a, n):
    rows = []
    if a is None:
        return rows
    for row in a:
        if len(row) != n:
            raise ValueError("constraint row length mismatch")
        rows.append(list(row))
    return rows


def solve_lp(c, a_eq=None, b_eq=None, a_ub=None, b_ub=None, *,
             maximize=False, exact=False, solver="auto"):
    """Solve the LP; status is reported in the result, nothing raises."""
    c = list(c)
    n = len(c)
    a_eq = _as_rows(a_eq, n)
    b_eq = list(b_eq or [])
    a_ub = _as_rows(a_ub, n)
    b_ub = list(b_ub or [])
    if len(a_eq) != len(b_eq) or len(a_ub) != len(b_ub):
        raise ValueError("rhs length mismatch")

    if maximize:
        c = [-v for v in c]

    if solver == "auto":
        m = len(a_eq) + len(a_ub)
        cells = (m + 1) * (n + m + 1)
        solver = "bundled" if (exact or cells <= BUNDLED_CELL_LIMIT) else "highs"

    if solver == "bundled":
        if exact:
            res = _simplex_exact(c, a_eq, b_eq, a_ub, b_ub)
        else:
            try:
                res = _simplex_float(c, a_eq, b_eq, a_ub, b_ub)
            except LPNumericalFailure:
                # Degenerate float instance ground the tableau down; the
                # sparse backend is the deterministic escape hatch.
                res = _highs(c, a_eq, b_eq, a_ub, b_ub)
    elif solver == "highs":
        res = _highs(c, a_eq, b_eq, a_ub, b_ub)
    else:
        raise ValueError(f"unknown solver {solver!r}")

    if maximize and res.status == "optimal":
        res.value = -res.value
        res.duals_eq = [-y for y in res.duals_eq]
        res.duals_ub = [-y for y in res.duals_ub]
    return res


def solve_lp_or_raise(*args, **kwargs):
    res = solve_lp(*args, **kwargs)
    if res.status == "infeasible":
        raise Infeasible("LP infeasible")
    if res.status == "unbounded":
        raise Unbounded("LP unbounded")
    return res


def _highs(c, a_eq, b_eq, a_ub, b_ub):
    from scipy.sparse import csr_matrix

    def conv(rows):
        return csr_matrix(np.asarray(rows, dtype=float)) if rows else None

    return solve_sparse_highs(np.asarray([float(v) for v in c], dtype=float),
                              conv(a_eq), b_eq, conv(a_ub), b_ub)


def solve_sparse_highs(c, a_eq_csr, b_eq, a_ub_csr, b_ub, maximize=False):
    """HiGHS entry point taking prebuilt sparse matrices (reused across calls)."""
    from scipy.optimize import linprog

    c = np.asarray(c, dtype=float)
    if maximize:
        c = -c
    res = linprog(
        c,
        A_ub=a_ub_csr, b_ub=np.asarray(b_ub, dtype=float) if len(b_ub or []) else None,
        A_eq=a_eq_csr, b_eq=np.asarray(b_eq, dtype=float) if len(b_eq or []) else None,
        bounds=(0, None), method="highs",
    )
    if res.status == 2:
        return LPResult("infeasible")
    if res.status == 3:
        return LPResult("unbounded")
    if res.status != 0:
        raise LPNumericalFailure(f"HiGHS failed: {res.message}")
    duals_eq = list(-np.asarray(res.eqlin.marginals)) if len(b_eq or []) else []
    duals_ub = list(-np.asarray(res.ineqlin.marginals)) if len(b_ub or []) else []
    value = float(res.fun)
    if maximize:
        value = -value
        duals_eq = [-y for y in duals_eq]
        duals_ub = [-y for y in duals_ub]
    return LPResult("optimal", list(res.x), value, duals_eq, duals_ub)


class _Tableau:
    """Shared setup for both simplex variants.

    Rows: ub constraints then eq constraints, rhs made nonnegative by sign
    flip.  Columns: structural | slack (per ub row) | artificial | rhs.
    Flipped ub rows and all eq rows receive artificial columns.  Artificial
    columns are never allowed to re-enter, which also lets duals be read off
    the final objective row at each row's initial basic column.
    """

    def __init__(self, c, a_eq, b_eq, a_ub, b_ub, zero, one):
        self.n = len(c)
        self.m_ub = len(a_ub)
        self.m = self.m_ub + len(a_eq)
        rows = [list(r) for r in a_ub] + [list(r) for r in a_eq]
        rhs = list(b_ub) + list(b_eq)
        self.sign = [one] * self.m
        for i in range(self.m):
            if rhs[i] < zero:
                self.sign[i] = -one
                rhs[i] = -rhs[i]
                rows[i] = [-v for v in rows[i]]
        self.slack_col = {}
        ncols = self.n
        for i in range(self.m_ub):
            self.slack_col[i] = ncols
            ncols += 1
        self.art_col = {}
        for i in range(self.m):
            if i >= self.m_ub or self.sign[i] != one:
                self.art_col[i] = ncols
                ncols += 1
        self.ncols = ncols
        self.rows = rows
        self.rhs = rhs
        self.basis = [self.art_col.get(i, self.slack_col.get(i)) for i in range(self.m)]
        self.artificials = sorted(self.art_col.values())

    def duals(self, obj_row):
        """Duals for the original (unflipped) rows from reduced costs."""
        duals_ub, duals_eq = [], []
        for i in range(self.m):
            if i in self.art_col:
                y = -obj_row[self.art_col[i]]
            else:
                y = -obj_row[self.slack_col[i]]
            y = y * self.sign[i]
            (duals_ub if i < self.m_ub else duals_eq).append(y)
        return duals_eq, duals_ub


def _simplex_float(c, a_eq, b_eq, a_ub, b_ub):
    tab = _Tableau([float(v) for v in c],
                   [[float(v) for v in r] for r in a_eq], [float(v) for v in b_eq],
                   [[float(v) for v in r] for r in a_ub], [float(v) for v in b_ub],
                   0.0, 1.0)
    m, n, ncols = tab.m, tab.n, tab.ncols
    if m == 0:
        if any(v < -PIVOT_TOL for v in c):
            return LPResult("unbounded")
        return LPResult("optimal", [0.0] * n, 0.0, [], [])

    T = np.zeros((m, ncols + 1))
    for i in range(m):
        T[i, :n] = tab.rows[i]
        if i in tab.slack_col:
            T[i, tab.slack_col[i]] = tab.sign[i]
        if i in tab.art_col:
            T[i, tab.art_col[i]] = 1.0
        T[i, ncols] = tab.rhs[i]
    basis = np.array(tab.basis, dtype=int)
    blocked = np.zeros(ncols, dtype=bool)
    blocked[tab.artificials] = True

    max_iters = 20000 + 50 * (m + ncols)

    def run_phase(cost, allow_art):
        nonlocal T
        obj = np.zeros(ncols + 1)
        obj[:ncols] = cost
        for i in range(m):
            cb = cost[basis[i]]
            if cb != 0.0:
                obj -= cb * T[i]
        stall, bland, last = 0, False, None
        for _ in range(max_iters):
            cols = obj[:ncols].copy()
            if not allow_art:
                cols[blocked] = np.inf
            if bland:
                cand = np.nonzero(cols < -PIVOT_TOL)[0]
                if cand.size == 0:
                    return obj
                enter = int(cand[0])
            else:
                enter = int(np.argmin(cols))
                if cols[enter] >= -PIVOT_TOL:
                    return obj
            col = T[:, enter]
            pos = np.nonzero(col > PIVOT_TOL)[0]
            if pos.size == 0:
                return None
            ratios = T[pos, ncols] / col[pos]
            rmin = ratios.min()
            near = pos[ratios <= rmin + 1e-9 * (1.0 + abs(rmin))]
            if bland:
                leave = int(near[np.argmin(basis[near])])
            else:
                # Stability: among (near-)minimal ratios take the largest pivot.
                leave = int(near[np.argmax(T[near, enter])])
            piv = T[leave, enter]
            T[leave] /= piv
            factor = T[:, enter].copy()
            factor[leave] = 0.0
            T -= np.outer(factor, T[leave])
            T[np.abs(T) < 1e-12] = 0.0  # keep pivot noise from compounding
            if obj[enter] != 0.0:
                obj = obj - obj[enter] * T[leave]
                obj[np.abs(obj) < 1e-12] = 0.0
            basis[leave] = enter
            cur = obj[ncols]
            if last is not None and cur >= last - 1e-13:
                stall += 1
                if stall > 3 * (m + 2):
                    bland = True  # sticky: guarantees termination
            else:
                stall = 0
            last = cur
        raise LPNumericalFailure("simplex iteration limit exceeded")

    if tab.artificials:
        obj_cost = np.zeros(ncols)
        obj_cost[tab.artificials] = 1.0
        obj = run_phase(obj_cost, allow_art=True)
        if obj is None:
            raise LPNumericalFailure("phase-1 unbounded")
        residual = -obj[ncols]
        if residual > 1e-5:
            return LPResult("infeasible")
        if residual > 1e-8:
            # Ambiguous zone: accumulated pivot noise; defer to HiGHS.
            return _highs(c, a_eq, b_eq, a_ub, b_ub)
        # Pivot zero-valued basic artificials out so they cannot regrow in
        # phase 2; rows with no real coefficients are redundant and inert.
        art_set = set(tab.artificials)
        for i in range(m):
            if basis[i] in art_set:
                row = T[i, :ncols]
                cand = np.nonzero((np.abs(row) > PIVOT_TOL) &
                                  ~blocked[:ncols])[0]
                if cand.size:
                    j = int(cand[0])
                    piv = T[i, j]
                    T[i] /= piv
                    factor = T[:, j].copy()
                    factor[i] = 0.0
                    T -= np.outer(factor, T[i])
                    basis[i] = j

    obj_cost = np.zeros(ncols)
    obj_cost[:n] = c
    obj = run_phase(obj_cost, allow_art=False)
    if obj is None:
        return LPResult("unbounded")

    x = [0.0] * n
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = float(T[i, ncols])
    value = float(np.dot(c, x))
    duals_eq, duals_ub = tab.duals(obj)
    return LPResult("optimal", x, value,
                    [float(v) for v in duals_eq], [float(v) for v in duals_ub])


def _simplex_exact(c, a_eq, b_eq, a_ub, b_ub):
    F = Fraction
    c = [F(v) for v in c]
    tab = _Tableau(c,
                   [[F(v) for v in r] for r in a_eq], [F(v) for v in b_eq],
                   [[F(v) for v in r] for r in a_ub], [F(v) for v in b_ub],
                   F(0), F(1))
    m, n, ncols = tab.m, tab.n, tab.ncols
    if m == 0:
        if any(v < 0 for v in c):
            return LPResult("unbounded")
        return LPResult("optimal", [F(0)] * n, F(0), [], [])

    T = [[F(0)] * (ncols + 1) for _ in range(m)]
    for i in range(m):
        for j, v in enumerate(tab.rows[i]):
            T[i][j] = v
        if i in tab.slack_col:
            T[i][tab.slack_col[i]] = tab.sign[i]
        if i in tab.art_col:
            T[i][tab.art_col[i]] = F(1)
        T[i][ncols] = tab.rhs[i]
    basis = list(tab.basis)
    blocked = set(tab.artificials)

    max_iters = 20000 + 50 * (m + ncols)

    def run_phase(cost, allow_art):
        obj = [F(0)] * (ncols + 1)
        for j, v in enumerate(cost):
            obj[j] = v
        for i in range(m):
            cb = cost[basis[i]] if basis[i] < len(cost) else F(0)
            if cb:
                row = T[i]
                obj = [o - cb * r for o, r in zip(obj, row)]
        stall, bland = 0, False
        for _ in range(max_iters):
            enter = -1
            if bland:
                for j in range(ncols):
                    if not allow_art and j in blocked:
                        continue
                    if obj[j] < 0:
                        enter = j
                        break
            else:
                best = F(0)
                for j in range(ncols):
                    if not allow_art and j in blocked:
                        continue
                    if obj[j] < best:
                        best = obj[j]
                        enter = j
            if enter < 0:
                return obj
            leave, best_ratio = -1, None
            for i in range(m):
                a = T[i][enter]
                if a > 0:
                    ratio = T[i][ncols] / a
                    if best_ratio is None or ratio < best_ratio or (
                            ratio == best_ratio and basis[i] < basis[leave]):
                        best_ratio, leave = ratio, i
            if leave < 0:
                return None
            piv = T[leave][enter]
            T[leave] = [v / piv for v in T[leave]]
            for i in range(m):
                if i != leave and T[i][enter]:
                    f = T[i][enter]
                    T[i] = [v - f * w for v, w in zip(T[i], T[leave])]
            if obj[enter]:
                f = obj[enter]
                obj = [v - f * w for v, w in zip(obj, T[leave])]
            basis[leave] = enter
            stall += 1
            if stall > 3 * (m + ncols):
                bland = True
        raise LPNumericalFailure("simplex iteration limit exceeded")

    if tab.artificials:
        cost1 = [F(0)] * ncols
        for j in tab.artificials:
            cost1[j] = F(1)
        obj = run_phase(cost1, allow_art=True)
        if obj is None:
            raise LPNumericalFailure("phase-1 unbounded")
        if -obj[ncols] > 0:
            return LPResult("infeasible")
        art_set = set(tab.artificials)
        for i in range(m):
            if basis[i] in art_set:
                cand = next((j for j in range(ncols)
                             if j not in blocked and T[i][j] != 0), None)
                if cand is not None:
                    piv = T[i][cand]
                    T[i] = [v / piv for v in T[i]]
                    for k in range(m):
                        if k != i and T[k][cand]:
                            f = T[k][cand]
                            T[k] = [v - f * w for v, w in zip(T[k], T[i])]
                    basis[i] = cand

    cost2 = [F(0)] * ncols
    for j in range(n):
        cost2[j] = c[j]
    obj = run_phase(cost2, allow_art=False)
    if obj is None:
        return LPResult("unbounded")

    x = [F(0)] * n
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i][ncols]
    value = sum((ci * xi for ci, xi in zip(c, x)), F(0))
    duals_eq, duals_ub = tab.duals(obj)
    return LPResult("optimal", x, value, duals_eq, duals_ub)
