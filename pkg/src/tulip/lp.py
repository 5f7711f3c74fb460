"""Bounded-variable simplex for the LP relaxations.

Rows are turned into equalities with one slack per row (``a.x + s = b``);
the slack bounds encode the sense.  Column ``j < n`` is structural, column
``n + i`` is the slack of row ``i``.  Bounds are handled implicitly: a
nonbasic column sits at its lower or upper bound (or at 0 when free).

The basis inverse is kept explicitly, updated with product-form eta steps
and refactorized from an LU decomposition every ``REFACTOR`` pivots.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg.blas import dger as _dger

from .core import EQ, GE, LE, LinearProgram

EPS_FEAS = 1e-7
EPS_DUAL = 1e-7
EPS_PIVOT = 1e-9
REFACTOR = 50

OPTIMAL, INFEASIBLE, UNBOUNDED, NUMERICAL = "optimal", "infeasible", "unbounded", "numerical"
INTERRUPTED = "interrupted"      # deadline passed mid-solve


@dataclass(frozen=True)
class Basis:
    head: tuple[int, ...]
    at_upper: frozenset = frozenset()


@dataclass
class LpSolution:
    status: str
    point: np.ndarray
    objective: float
    basis: Basis | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    pivots: int = 0


class _Singular(Exception):
    pass


class _Interrupted(Exception):
    pass


class SimplexSolver:
    """Stateful LP solver; rows may be appended and bounds changed between solves."""

    def __init__(self, cost, lower, upper, A=None, senses=(), rhs=()):
        self.c = np.asarray(cost, dtype=float).copy()
        self.n = self.c.shape[0]
        self.lo = np.asarray(lower, dtype=float).copy()
        self.up = np.asarray(upper, dtype=float).copy()
        self.A = np.zeros((0, self.n)) if A is None else np.asarray(A, dtype=float).reshape(-1, self.n)
        self.senses = list(senses)
        self.b = np.asarray(rhs, dtype=float).copy()
        self._M = None
        self.pivots = 0
        self.max_degenerate = None
        self._deadline = None

    @classmethod
    def from_lp(cls, lp: LinearProgram) -> "SimplexSolver":
        A = np.zeros((lp.num_rows, lp.num_vars))
        for i, row in enumerate(lp.rows):
            if row.idx:
                A[i, list(row.idx)] = row.val
        return cls(lp.objective, lp.lower, lp.upper, A, lp.senses, lp.rhs)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def add_rows(self, A_new, senses, rhs):
        A_new = np.asarray(A_new, dtype=float).reshape(-1, self.n)
        if A_new.shape[0] == 0:
            return
        self.A = np.vstack([self.A, A_new])
        self.senses.extend(senses)
        self.b = np.concatenate([self.b, np.asarray(rhs, dtype=float)])
        self._M = None

    def set_bounds(self, lower, upper):
        self.lo = np.asarray(lower, dtype=float).copy()
        self.up = np.asarray(upper, dtype=float).copy()

    # -- internal helpers -------------------------------------------------

    def _matrix(self):
        if self._M is None:
            self._M = np.hstack([self.A, np.eye(self.m)])
        return self._M

    def _full_bounds(self):
        slo = np.empty(self.m)
        sup = np.empty(self.m)
        for i, s in enumerate(self.senses):
            if s == LE:
                slo[i], sup[i] = 0.0, math.inf
            elif s == GE:
                slo[i], sup[i] = -math.inf, 0.0
            else:
                slo[i], sup[i] = 0.0, 0.0
        return np.concatenate([self.lo, slo]), np.concatenate([self.up, sup])

    def _factor(self):
        head = np.asarray(self.head)
        if (head == np.arange(self.n, self.n + self.m)).all():
            # slack basis: B is the identity
            self.Binv = np.asfortranarray(np.eye(self.m))
            self.since_refactor = 0
            return
        B = self.M[:, self.head]
        try:
            lu, piv = scipy.linalg.lu_factor(B, check_finite=False)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise _Singular() from exc
        diag = np.abs(np.diag(lu))
        if diag.size and diag.min() < 1e-11 * max(1.0, diag.max()):
            raise _Singular()
        inv, info = scipy.linalg.lapack.dgetri(lu, piv)
        if info != 0:
            raise _Singular()
        self.Binv = np.asfortranarray(inv)
        self.since_refactor = 0

    def _nonbasic_values(self):
        x = np.zeros(self.N)
        nb = self.nonbasic
        lo, up = self.flo, self.fup
        x[nb] = np.where(self.at_up[nb], up[nb], lo[nb])
        free = nb & ~np.isfinite(x)
        x[free] = 0.0
        x[self.head] = 0.0
        return x

    def _recompute_primal(self):
        x = self._nonbasic_values()
        xb = self.Binv @ (self.b - self.M @ x)
        x[self.head] = xb
        self.x = x

    def _reduced_costs(self, cost):
        y = cost[self.head] @ self.Binv
        d = cost - y @ self.M
        d[self.head] = 0.0
        return y, d

    def _pivot(self, r, q, alpha_q):
        piv = alpha_q[r]
        Binv = self.Binv
        Binv[r] /= piv
        col = alpha_q.copy()
        col[r] = 0.0
        # in-place rank-1 update; Binv is Fortran-ordered so dger does not copy
        self.Binv = _dger(-1.0, col, Binv[r].copy(), a=Binv, overwrite_a=True)
        leaving = int(self.head[r])
        self.head[r] = q
        self.nonbasic[q] = False
        self.nonbasic[leaving] = True
        self.pivots += 1
        self.since_refactor += 1
        return leaving

    def _maybe_refactor(self):
        if self.since_refactor >= REFACTOR:
            if self._past_deadline():
                raise _Interrupted
            self._factor()
            self._recompute_primal()
            return True
        return False

    def _setup(self, basis):
        self.M = self._matrix()
        m, n = self.m, self.n
        self.N = n + m
        self.flo, self.fup = self._full_bounds()
        self.cost = np.concatenate([self.c, np.zeros(m)])
        head = None
        at_upper = frozenset()
        if basis is not None:
            head = [j for j in basis.head if j < self.N]
            seen = set(head)
            # rows appended since the basis was taken enter with their slack basic
            m_old = min(len(basis.head), m)
            for i in list(range(m_old, m)) + list(range(m_old)):
                if len(head) >= m:
                    break
                if n + i not in seen:
                    head.append(n + i)
                    seen.add(n + i)
            at_upper = basis.at_upper
            if len(head) != m or len(set(head)) != m:
                head = None
        if head is None:
            head = list(range(n, n + m))
            at_upper = frozenset()
        self.head = np.asarray(head, dtype=np.intp)
        self.movable = self.flo < self.fup
        self.free = ~np.isfinite(self.flo) & ~np.isfinite(self.fup)
        self.nonbasic = np.ones(self.N, dtype=bool)
        self.nonbasic[head] = False
        at = np.zeros(self.N, dtype=bool)
        for j in at_upper:
            if j < self.N:
                at[j] = True
        # a column with an infinite bound can only rest at the finite one
        at[~np.isfinite(self.flo) & np.isfinite(self.fup)] = True
        at[np.isfinite(self.flo) & ~np.isfinite(self.fup)] = False
        self.at_up = at
        if not self._extend_inverse(basis):
            try:
                self._factor()
            except _Singular:
                if basis is None:
                    raise
                return self._setup(None)

    def _extend_inverse(self, basis):
        """Reuse the inverse from the previous solve when only rows were appended.

        With the new slacks basic, B' = [[B, 0], [C, I]] and
        inv(B') = [[inv(B), 0], [-C inv(B), I]].
        """
        state = getattr(self, "_state", None)
        if basis is None or state is None or state[0] != basis.head:
            return False
        old_head, Binv = state
        k_old = len(old_head)
        if self.m < k_old or tuple(int(j) for j in self.head[:k_old]) != old_head:
            return False
        if Binv.shape[0] != k_old or self.since_refactor >= REFACTOR:
            return False
        C = self.M[k_old:, list(old_head)]
        inv = np.zeros((self.m, self.m), order="F")
        inv[:k_old, :k_old] = Binv
        inv[k_old:, :k_old] = -C @ Binv
        inv[k_old:, k_old:] = np.eye(self.m - k_old)
        self.Binv = inv
        return True

    def _make_dual_feasible(self):
        """Flip boxed nonbasic columns to the bound matching their reduced cost.

        Returns True when every nonbasic column is then dual feasible.
        """
        _, d = self._reduced_costs(self.cost)
        nb = self.nonbasic
        boxed = np.isfinite(self.flo) & np.isfinite(self.fup)
        neg = nb & boxed & (d < -EPS_DUAL)
        pos = nb & boxed & (d > EPS_DUAL)
        self.at_up[neg] = True
        self.at_up[pos] = False
        self._recompute_primal()
        return self._dual_feasible(d)

    def _dual_feasible(self, d):
        nb = self.nonbasic & (self.flo < self.fup)
        at_lo = nb & ~self.at_up & np.isfinite(self.flo)
        at_up = nb & self.at_up & np.isfinite(self.fup)
        free = nb & ~np.isfinite(self.flo) & ~np.isfinite(self.fup)
        bad = (at_lo & (d < -EPS_DUAL)) | (at_up & (d > EPS_DUAL)) | (free & (np.abs(d) > EPS_DUAL))
        return not bad.any()

    def _primal_infeasibility(self):
        xb = self.x[self.head]
        lo = self.flo[self.head]
        up = self.fup[self.head]
        return np.maximum(lo - xb, xb - up)

    # -- dual simplex -------------------------------------------------------

    def _dual_simplex(self, max_iter):
        _, d = self._reduced_costs(self.cost)
        for it in range(max_iter):
            self._check_clock(it)
            infeas = self._primal_infeasibility()
            bad = infeas > EPS_FEAS
            if not bad.any():
                return OPTIMAL
            # dual steepest edge with exact weights ||e_r' inv(B)||^2
            weights = np.einsum("ij,ij->i", self.Binv, self.Binv)
            score = np.where(bad, np.square(np.where(bad, infeas, 0.0)) / weights, -1.0)
            r = int(np.argmax(score))
            p = int(self.head[r])
            xr = self.x[p]
            to_lower = xr < self.flo[p]
            target = self.flo[p] if to_lower else self.fup[p]
            row = self.Binv[r] @ self.M
            cand = self.nonbasic & self.movable
            free = self.free
            # x_p moves by -row[j] * dx_j; need x_p up when heading to lower
            sgn = -1.0 if to_lower else 1.0
            s_row = sgn * row
            ok = cand & (((~self.at_up | free) & (s_row > EPS_PIVOT))
                         | ((self.at_up | free) & (s_row < -EPS_PIVOT)))
            if not ok.any():
                return INFEASIBLE
            idx = np.flatnonzero(ok)
            q, flips = self._bound_flipping_ratio(idx, row, d, free, abs(xr - target))
            if q is None:
                return INFEASIBLE
            if flips:
                self._flip(flips)
                xr = self.x[p]
            alpha_q = self.Binv @ self.M[:, q]
            if abs(alpha_q[r]) < EPS_PIVOT:
                self._factor()
                self._recompute_primal()
                _, d = self._reduced_costs(self.cost)
                continue
            dx = (xr - target) / alpha_q[r]
            xq = self.x[q] + dx
            theta = d[q] / row[q]
            self.x[self.head] -= dx * alpha_q
            leaving = self._pivot(r, q, alpha_q)
            self.x[q] = xq
            self.x[leaving] = target
            self.at_up[leaving] = not to_lower
            d = d - theta * row
            d[leaving] = -theta
            d[q] = 0.0
            if self._maybe_refactor():
                _, d = self._reduced_costs(self.cost)
        return NUMERICAL

    def _bound_flipping_ratio(self, idx, row, d, free, slope):
        """Dual ratio test that passes breakpoints of boxed columns.

        Walks the breakpoints in ratio order; a boxed column is flipped to its
        other bound while the leaving row stays infeasible, otherwise it
        blocks.  Among the blocking candidate and its near-ties (Harris
        tolerance) the largest pivot enters.  Returns ``(q, flipped)`` or
        ``(None, [])`` when the row cannot be repaired (primal infeasible).
        """
        a = np.abs(row[idx])
        f = free[idx]
        up = self.at_up[idx] & ~f
        dj = np.where(f, np.abs(d[idx]), np.maximum(np.where(up, -d[idx], d[idx]), 0.0))
        ratio = dj / a
        step = a * (self.fup[idx] - self.flo[idx])
        order = np.lexsort((-a, ratio))
        stop = None
        for pos, k in enumerate(order):
            if not np.isfinite(step[k]) or slope - step[k] <= 0.0:
                stop = pos
                break
            slope -= step[k]
        if stop is None:
            if slope > EPS_FEAS:
                return None, []
            stop = len(order) - 1
        rest = order[stop:]
        harris = np.min((dj[rest] + EPS_DUAL) / a[rest])
        near = rest[ratio[rest] <= harris]
        k = int(near[np.argmax(a[near])])
        flips = [int(idx[j]) for j in order[:stop] if j != k]
        return int(idx[k]), flips

    def _flip(self, cols):
        cols = np.asarray(cols)
        old = self.x[cols].copy()
        self.at_up[cols] = ~self.at_up[cols]
        new = np.where(self.at_up[cols], self.fup[cols], self.flo[cols])
        self.x[cols] = new
        self.x[self.head] -= self.Binv @ (self.M[:, cols] @ (new - old))

    # -- primal simplex -----------------------------------------------------

    def _primal_simplex(self, max_iter, phase1=False):
        m = self.m
        degenerate = 0
        bland = False
        limit = 2 * (m + self.n) if self.max_degenerate is None else self.max_degenerate
        for it in range(max_iter):
            self._check_clock(it)
            if phase1:
                infeas = self._primal_infeasibility()
                if infeas.max(initial=0.0) <= EPS_FEAS:
                    return OPTIMAL
                xb = self.x[self.head]
                cost = np.zeros(self.N)
                cb = np.where(xb < self.flo[self.head] - EPS_FEAS, -1.0,
                              np.where(xb > self.fup[self.head] + EPS_FEAS, 1.0, 0.0))
                cost[self.head] = cb
            else:
                cost = self.cost
            _, d = self._reduced_costs(cost)
            nb = self.nonbasic & self.movable
            free = self.free
            inc = nb & (~self.at_up | free) & (d < -EPS_DUAL)
            dec = nb & (self.at_up | free) & (d > EPS_DUAL)
            cand = inc | dec
            if not cand.any():
                return INFEASIBLE if phase1 else OPTIMAL
            if bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                score = np.where(cand, np.abs(d), -1.0)
                q = int(np.argmax(score))
            direction = 1.0 if inc[q] else -1.0
            alpha = self.Binv @ self.M[:, q]
            delta = -direction * alpha
            xb = self.x[self.head]
            lo = self.flo[self.head]
            up = self.fup[self.head]
            ratios = np.full(m, math.inf)
            dn = delta < -EPS_PIVOT
            upm = delta > EPS_PIVOT
            if phase1:
                below = xb < lo - EPS_FEAS
                above = xb > up + EPS_FEAS
                feas = ~below & ~above
                # feasible basics block at the bound they would cross
                sel = feas & dn & np.isfinite(lo)
                ratios[sel] = (xb[sel] - lo[sel]) / -delta[sel]
                sel = feas & upm & np.isfinite(up)
                ratios[sel] = (up[sel] - xb[sel]) / delta[sel]
                # infeasible basics block once they reach the violated bound
                sel = below & upm
                ratios[sel] = (lo[sel] - xb[sel]) / delta[sel]
                sel = above & dn
                ratios[sel] = (xb[sel] - up[sel]) / -delta[sel]
            else:
                sel = dn & np.isfinite(lo)
                ratios[sel] = (xb[sel] - lo[sel]) / -delta[sel]
                sel = upm & np.isfinite(up)
                ratios[sel] = (up[sel] - xb[sel]) / delta[sel]
            ratios = np.maximum(ratios, 0.0)
            flip = self.fup[q] - self.flo[q]
            r = -1
            t = math.inf
            if np.isfinite(ratios).any():
                tmin = ratios.min()
                if bland:
                    ties = np.flatnonzero(ratios <= tmin + 1e-12)
                    r = int(min(ties, key=lambda i: self.head[i]))
                else:
                    ties = np.flatnonzero(ratios <= tmin + 1e-9 * max(1.0, tmin))
                    r = int(ties[np.argmax(np.abs(delta[ties]))])
                t = ratios[r]
            if flip <= t:
                if not math.isfinite(flip):
                    return UNBOUNDED
                self.x[self.head] += flip * delta
                self.x[q] += direction * flip
                self.at_up[q] = not self.at_up[q]
                degenerate = 0
                continue
            if t <= 1e-12:
                degenerate += 1
                if degenerate > limit:
                    bland = True
            leaving_to_upper = delta[r] > 0
            if phase1:
                leaving_to_upper = (xb[r] > up[r] + EPS_FEAS) or (
                    not (xb[r] < lo[r] - EPS_FEAS) and delta[r] > 0)
            xq = self.x[q] + direction * t
            self.x[self.head] += t * delta
            leaving = self._pivot(r, q, alpha)
            self.x[q] = xq
            self.x[leaving] = self.fup[leaving] if leaving_to_upper else self.flo[leaving]
            self.at_up[leaving] = bool(leaving_to_upper)
            self._maybe_refactor()
        return NUMERICAL

    # -- driver -----------------------------------------------------------

    def _check_clock(self, it):
        if self._deadline is not None and it % 16 == 0 and time.perf_counter() > self._deadline:
            raise _Interrupted

    def _past_deadline(self):
        return self._deadline is not None and time.perf_counter() > self._deadline

    def solve(self, basis: Basis | None = None, max_iter: int | None = None,
              deadline: float | None = None) -> LpSolution:
        """``deadline`` is a ``time.perf_counter()`` value; past it the solve stops
        with status ``interrupted``."""
        self.pivots = 0
        self._deadline = deadline
        if max_iter is None:
            max_iter = 50 * (self.m + self.n) + 1000
        for attempt in range(2):
            if self._past_deadline():
                status = INTERRUPTED
                break
            try:
                status = self._solve_once(basis if attempt == 0 else None, max_iter)
            except _Singular:
                status = NUMERICAL
            except _Interrupted:
                status = INTERRUPTED
            if status != NUMERICAL:
                break
        if status != OPTIMAL:
            value = {INFEASIBLE: math.inf, UNBOUNDED: -math.inf}.get(status, math.nan)
            return LpSolution(status, np.full(self.n, np.nan), value, pivots=self.pivots)
        point = self.x[: self.n].copy()
        self._state = (tuple(int(j) for j in self.head), self.Binv)
        y, d = self._reduced_costs(self.cost)
        at_upper = frozenset(int(j) for j in np.flatnonzero(self.nonbasic & self.at_up))
        return LpSolution(OPTIMAL, point, float(self.c @ point),
                          Basis(tuple(int(j) for j in self.head), at_upper),
                          duals=y, reduced_costs=d[: self.n], pivots=self.pivots)

    def _solve_once(self, basis, max_iter):
        if self.m == 0:
            return self._solve_no_rows()
        self._setup(basis)
        if self._make_dual_feasible():
            status = self._dual_simplex(max_iter)
            if status != OPTIMAL:
                return status
            _, d = self._reduced_costs(self.cost)
            if not self._dual_feasible(d):
                status = self._primal_simplex(max_iter)
        else:
            self._recompute_primal()
            status = OPTIMAL
            if self._primal_infeasibility().max(initial=0.0) > EPS_FEAS:
                status = self._primal_simplex(max_iter, phase1=True)
                if status == INFEASIBLE:
                    return INFEASIBLE
            if status == OPTIMAL:
                status = self._primal_simplex(max_iter)
        if status != OPTIMAL:
            return status
        self._recompute_primal()
        if self._residual_ok():
            return OPTIMAL
        self._factor()
        self._recompute_primal()
        return OPTIMAL if self._residual_ok() else NUMERICAL

    def _residual_ok(self):
        xs = self.x[: self.n]
        lo, up = self.lo, self.up
        if ((xs < lo - 10 * EPS_FEAS) | (xs > up + 10 * EPS_FEAS)).any():
            return False
        act = self.A @ xs
        tol = 1e-6 * (1.0 + np.abs(self.b))
        for i, s in enumerate(self.senses):
            if s == LE and act[i] > self.b[i] + tol[i]:
                return False
            if s == GE and act[i] < self.b[i] - tol[i]:
                return False
            if s == EQ and abs(act[i] - self.b[i]) > tol[i]:
                return False
        return True

    def _solve_no_rows(self):
        # separable: each column sits at its cheapest bound
        x = np.zeros(self.n)
        for j in range(self.n):
            c = self.c[j]
            lo, up = self.lo[j], self.up[j]
            if c > 0:
                if not math.isfinite(lo):
                    return UNBOUNDED
                x[j] = lo
            elif c < 0:
                if not math.isfinite(up):
                    return UNBOUNDED
                x[j] = up
            else:
                x[j] = lo if math.isfinite(lo) else (up if math.isfinite(up) else 0.0)
        self.x = x
        self.head = np.zeros(0, dtype=np.intp)
        self.nonbasic = np.ones(self.n, dtype=bool)
        self.at_up = np.array([x[j] == self.up[j] and x[j] != self.lo[j] for j in range(self.n)],
                              dtype=bool)
        self.M = np.zeros((0, self.n))
        self.Binv = np.zeros((0, 0))
        self.N = self.n
        self.cost = self.c.copy()
        return OPTIMAL


def solve_lp(lp: LinearProgram, warm_basis: Basis | None = None) -> LpSolution:
    """Solve an LP; ``warm_basis`` may come from an earlier solve of a prefix of the rows."""
    return SimplexSolver.from_lp(lp).solve(warm_basis)


def dual_bound(lp: LinearProgram, sol: LpSolution) -> float:
    """Objective of the dual solution implied by the final basis."""
    y = sol.duals
    d = sol.reduced_costs
    val = float(np.dot(y, lp.rhs)) if len(lp.rhs) else 0.0
    for j in range(lp.num_vars):
        if d[j] > 0:
            val += d[j] * lp.lower[j]
        elif d[j] < 0:
            val += d[j] * lp.upper[j]
    return val
