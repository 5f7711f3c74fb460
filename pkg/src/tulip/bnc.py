"""Branch-and-cut over the simplex engine.

Separators are called on fractional points at the root (cutting-plane loop)
and on every ``FRACTIONAL_EVERY``-th node; integer candidates are always
checked before they become incumbents, which gives lazy-constraint
semantics.
"""
from __future__ import annotations

import heapq
import itertools
import math
import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import (EPS_INT, EPS_TIGHT, EPS_VIOL, Cut, MilpModel, SolveReport, cut_slack,
                   cut_violation, relative_gap)
from .lp import INFEASIBLE, INTERRUPTED, NUMERICAL, OPTIMAL, LpSolution, SimplexSolver

ROOT_ROUNDS = 200
NODE_ROUNDS = 50
FRACTIONAL_EVERY = 8
PRUNE_TOL = 1e-9

OPTIMAL_STATUS, TIME_LIMIT, INFEASIBLE_STATUS = "optimal", "time_limit", "infeasible"


class CutPool:
    """Ordered cuts without duplicates (by canonical sparse form)."""

    def __init__(self, cuts=()):
        self.cuts: list[Cut] = []
        self._keys: set = set()
        for c in cuts:
            self.add(c)

    def add(self, cut: Cut) -> bool:
        k = cut.key()
        if k in self._keys:
            return False
        self._keys.add(k)
        self.cuts.append(cut)
        return True

    def __contains__(self, cut):
        return cut.key() in self._keys

    def __len__(self):
        return len(self.cuts)

    def __iter__(self):
        return iter(self.cuts)

    def __getitem__(self, i):
        return self.cuts[i]


@dataclass(order=True)
class BnbNode:
    bound: float
    neg_depth: int
    id: int
    changes: tuple = field(compare=False, default=())   # (col, lower, upper)
    parent: int = field(compare=False, default=-1)
    basis: object = field(compare=False, default=None)

    @property
    def depth(self):
        return -self.neg_depth


def filter_tight(pool, point, eps_tight: float = EPS_TIGHT) -> CutPool:
    """Keep the cuts whose slack at ``point`` is at most ``eps_tight``."""
    return CutPool(c for c in pool if cut_slack(c, point) <= eps_tight)


class _Relaxation:
    """The LP relaxation of a model plus the cuts installed so far."""

    def __init__(self, model: MilpModel):
        self.model = model
        self.solver = SimplexSolver.from_lp(model.lp)
        self.lower = np.asarray(model.lp.lower, float)
        self.upper = np.asarray(model.lp.upper, float)
        self.pool = CutPool()
        self.lp_solves = 0

    def install(self, cuts):
        new = [c for c in cuts if self.pool.add(c)]
        if not new:
            return []
        A = np.zeros((len(new), self.solver.n))
        for i, c in enumerate(new):
            A[i, list(c.row.idx)] = c.row.val
        self.solver.add_rows(A, [c.sense for c in new], [c.rhs for c in new])
        return new

    def solve(self, lower=None, upper=None, basis=None, deadline=None) -> LpSolution:
        self.solver.set_bounds(self.lower if lower is None else lower,
                               self.upper if upper is None else upper)
        self.lp_solves += 1
        return self.solver.solve(basis, deadline=deadline)


def _separate(model, point, integral, pool):
    found = []
    seen = set()
    for sep in model.separators:
        for cut in sep(model, point, integral):
            k = cut.key()
            if k in seen or cut in pool:
                continue
            if cut_violation(cut, point) > EPS_VIOL:
                seen.add(k)
                found.append(cut)
    return found


def _fractional(model, point):
    integral = np.asarray(model.integral, bool)
    frac = np.abs(point - np.round(point))
    return np.flatnonzero(integral & (frac > EPS_INT)), frac


def _cut_loop(relax, sol, max_rounds, deadline, lower=None, upper=None):
    """Separate at the current point and re-solve until nothing is violated."""
    model = relax.model
    added = []
    rounds = 0
    while sol.status == OPTIMAL and rounds < max_rounds:
        if deadline is not None and time.perf_counter() > deadline:
            break
        frac_idx, _ = _fractional(model, sol.point)
        cuts = _separate(model, sol.point, len(frac_idx) == 0, relax.pool)
        if not cuts:
            break
        added += relax.install(cuts)
        new = relax.solve(lower, upper, sol.basis, deadline)
        if new.status == INTERRUPTED:
            break           # keep the last point that was solved to optimality
        sol = new
        rounds += 1
    return sol, added, rounds


def solve_root(model: MilpModel, max_rounds: int = ROOT_ROUNDS, time_limit: float | None = None):
    """Cutting-plane loop on the LP relaxation.

    Returns the final LP solution and the pool of every cut appended.
    """
    if not model.separators:
        raise ValueError("solve_root needs at least one separator")
    deadline = None if time_limit is None else time.perf_counter() + time_limit
    relax = _Relaxation(model)
    sol = relax.solve(deadline=deadline)
    if sol.status != OPTIMAL:
        return sol, CutPool()
    sol, _, _ = _cut_loop(relax, sol, max_rounds, deadline)
    return sol, relax.pool


def _round_integral(model, point):
    x = point.copy()
    mask = np.asarray(model.integral, bool)
    x[mask] = np.round(x[mask])
    return x


def _most_fractional(frac_idx, point):
    f = point[frac_idx] - np.floor(point[frac_idx])
    dist = np.abs(f - 0.5)
    # argmin returns the first minimum, i.e. the lowest column index on ties
    return int(frac_idx[int(np.argmin(dist))])


def solve_bnc(model: MilpModel, initial_cuts=None, time_limit: float = 120.0,
              log=None, max_nodes: int | None = None) -> SolveReport:
    """Best-bound branch-and-cut with lazy separation of integer candidates."""
    t0 = time.perf_counter()
    deadline = t0 + time_limit
    relax = _Relaxation(model)
    if initial_cuts is not None:
        relax.install(list(initial_cuts))
    n_initial = len(relax.pool)
    c = np.asarray(model.lp.objective, float)

    incumbent, best_x = math.inf, None
    counter = itertools.count()
    heap = [BnbNode(-math.inf, 0, next(counter))]
    nodes = 0
    timed_out = False
    if log is not None:
        log.write("node,parent,depth,bound,incumbent,cuts_added,outcome\n")

    while heap:
        if time.perf_counter() > deadline or (max_nodes is not None and nodes >= max_nodes):
            timed_out = True
            break
        node = heapq.heappop(heap)
        if node.bound >= incumbent - PRUNE_TOL * max(1.0, abs(incumbent)):
            continue
        nodes += 1
        lower = relax.lower.copy()
        upper = relax.upper.copy()
        for j, lo, up in node.changes:
            lower[j], upper[j] = lo, up
        sol = relax.solve(lower, upper, node.basis, deadline)
        if sol.status == NUMERICAL:
            sol = relax.solve(lower, upper, None, deadline)
        n_cuts = 0
        rounds = 0
        outcome = "pruned"
        fractional_sep = node.id == 0 or nodes % FRACTIONAL_EVERY == 0
        limit = ROOT_ROUNDS if node.id == 0 else NODE_ROUNDS
        while True:
            if sol.status == INTERRUPTED:
                outcome = "interrupted"
                timed_out = True
                heapq.heappush(heap, node)
                break
            if sol.status == INFEASIBLE:
                outcome = "infeasible"
                break
            if sol.status != OPTIMAL:
                outcome = "numerical"
                break
            bound = max(sol.objective, node.bound)
            if bound >= incumbent - PRUNE_TOL * max(1.0, abs(incumbent)):
                break
            frac_idx, _ = _fractional(model, sol.point)
            if len(frac_idx) == 0:
                cuts = _separate(model, sol.point, True, relax.pool)
                if cuts:
                    n_cuts += len(relax.install(cuts))
                    sol = relax.solve(lower, upper, sol.basis, deadline)
                    continue
                x = _round_integral(model, sol.point)
                val = float(c @ x)
                if val < incumbent:
                    incumbent, best_x = val, x
                outcome = "incumbent"
                break
            if fractional_sep and rounds < limit and time.perf_counter() <= deadline:
                cuts = _separate(model, sol.point, False, relax.pool)
                if cuts:
                    n_cuts += len(relax.install(cuts))
                    rounds += 1
                    sol = relax.solve(lower, upper, sol.basis, deadline)
                    continue
            j = _most_fractional(frac_idx, sol.point)
            v = sol.point[j]
            down = node.changes + ((j, lower[j], math.floor(v)),)
            up = node.changes + ((j, math.ceil(v), upper[j]),)
            for ch in (down, up):
                heapq.heappush(heap, BnbNode(bound, node.neg_depth - 1, next(counter),
                                             ch, node.id, sol.basis))
            outcome = "branched"
            break
        if log is not None:
            lb = sol.objective if sol.status == OPTIMAL else math.inf
            log.write(f"{node.id},{node.parent},{node.depth},{lb!r},{incumbent!r},{n_cuts},{outcome}\n")
        if timed_out:
            break

    if timed_out:
        status = TIME_LIMIT
        bound = min([nd.bound for nd in heap] + [incumbent])
        if not math.isfinite(bound):
            grace = time.perf_counter() + max(1.0, 0.1 * time_limit)
            bound = min(_root_bound_fallback(relax, grace), incumbent)
    elif best_x is None:
        status, bound = INFEASIBLE_STATUS, incumbent
    else:
        status, bound = OPTIMAL_STATUS, incumbent
    added = Counter(cut.origin for cut in relax.pool.cuts[n_initial:])
    return SolveReport(status=status, objective=incumbent, bound=bound,
                       gap=relative_gap(incumbent, bound), nodes=nodes,
                       cuts_added=dict(added), point=best_x,
                       wall_time={"solve": time.perf_counter() - t0},
                       pool_size=len(relax.pool))


def _root_bound_fallback(relax, deadline):
    sol = relax.solve(deadline=deadline)
    if sol.status == OPTIMAL:
        return sol.objective
    return box_bound(relax.model.lp) if sol.status == INTERRUPTED else -math.inf


def box_bound(lp) -> float:
    """min c.x over the variable bounds alone (rows ignored)."""
    total = 0.0
    for c, lo, up in zip(lp.objective, lp.lower, lp.upper):
        if c > 0:
            total += c * lo
        elif c < 0:
            total += c * up
    return total if math.isfinite(total) else -math.inf


def check_incumbent(model: MilpModel, point) -> list:
    """Cuts any separator still finds at an accepted point (should be empty)."""
    return _separate(model, np.asarray(point, float), True, CutPool())
