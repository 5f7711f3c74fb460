"""Reduce, solve the reduced root, warm-start the full branch-and-cut."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from statistics import fmean
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .bnc import CutPool, filter_tight, solve_bnc, solve_root
from .core import Cut, MilpModel, ScenarioSet, SolveReport
from .lp import OPTIMAL
from .reduction import (distance_matrix, fast_forward_select, random_select,
                        reduction_fraction_to_target)


def transfer_by_meta(cut: Cut, source: MilpModel, target: MilpModel) -> Cut:
    """Re-index a cut through the (stage, key) tags shared by both models."""
    index = target.index_of()
    row = cut.row.remap({j: index[source.var_meta[j]] for j in cut.row.idx})
    return Cut(row, cut.sense, cut.rhs, cut.origin, cut.scenario, cut.aux)


@dataclass
class TwoStageProblem:
    """Everything the pipeline needs to know about one stochastic instance.

    ``build_model(scenarios, probabilities)`` takes 1-based original scenario
    indices.  ``distance(i, j)`` takes 0-based indices.  ``decision_columns``
    picks the columns that ``fix_first_stage_and_resolve`` clamps; by default
    every stage-0 column.
    """

    scenario_set: ScenarioSet
    build_model: Callable[[Sequence[int], Sequence[float]], MilpModel]
    distance: Callable[[int, int], float]
    transfer_cut: Callable[[Cut, MilpModel, MilpModel], Cut] = transfer_by_meta
    decision_columns: Callable[[MilpModel], list] | None = None
    name: str = ""

    @property
    def num_scenarios(self) -> int:
        return len(self.scenario_set)

    def full_model(self) -> MilpModel:
        S = self.num_scenarios
        return self.build_model(tuple(range(1, S + 1)), self.scenario_set.probabilities)

    def reduced_model(self, reduction) -> MilpModel:
        pairs = sorted(zip(reduction.selected, reduction.new_probabilities))
        return self.build_model(tuple(i + 1 for i, _ in pairs), tuple(q for _, q in pairs))

    def distances(self) -> np.ndarray:
        return distance_matrix(self.num_scenarios, self.distance)

    def first_stage_columns(self, model: MilpModel) -> list:
        if self.decision_columns is not None:
            return list(self.decision_columns(model))
        return model.stage_columns(0)


def solve_direct(problem: TwoStageProblem, time_limit: float = 120.0, log=None) -> SolveReport:
    t0 = time.perf_counter()
    model = problem.full_model()
    rep = solve_bnc(model, None, time_limit=time_limit - (time.perf_counter() - t0), log=log)
    rep.wall_time = {"build": time.perf_counter() - t0 - rep.wall_time["solve"], **rep.wall_time}
    return rep


def tulip_solve(problem: TwoStageProblem, fraction: float = 0.1, time_limit: float = 120.0,
                log=None) -> SolveReport:
    t0 = time.perf_counter()
    S = problem.num_scenarios
    target = reduction_fraction_to_target(S, fraction)
    red = fast_forward_select(problem.distances(), problem.scenario_set.probabilities, target)
    t1 = time.perf_counter()

    reduced = problem.reduced_model(red)
    sol, pool = solve_root(reduced, time_limit=max(0.0, time_limit - (t1 - t0)))
    tight = filter_tight(pool, sol.point) if sol.status == OPTIMAL else CutPool()
    t2 = time.perf_counter()

    full = problem.full_model()
    initial = [problem.transfer_cut(c, reduced, full) for c in tight]
    rep = solve_bnc(full, initial, time_limit=max(0.0, time_limit - (t2 - t0)), log=log)
    rep.cuts_transferred = len(tight)
    rep.root_pool_size = len(pool)
    rep.tight_ratio = len(tight) / len(pool) if len(pool) else 1.0
    rep.wall_time = {"reduction": t1 - t0, "root": t2 - t1, "bnc": time.perf_counter() - t2}
    return rep


def _decision(problem, model, point):
    return {model.var_meta[j]: float(round(point[j])) for j in problem.first_stage_columns(model)}


def fix_first_stage_and_resolve(problem: TwoStageProblem, first_stage_point: Mapping[Any, float],
                                time_limit: float = 120.0) -> SolveReport:
    """Clamp the decision columns (keyed by var_meta) and solve the full model.

    Decision columns absent from ``first_stage_point`` are fixed to 0.
    """
    model = problem.full_model()
    lower = np.asarray(model.lp.lower, float).copy()
    upper = np.asarray(model.lp.upper, float).copy()
    for j in problem.first_stage_columns(model):
        v = float(first_stage_point.get(model.var_meta[j], 0.0))
        lower[j] = upper[j] = v
    fixed = MilpModel(model.lp.with_bounds(lower, upper), model.integral, model.var_meta,
                      model.separators, model.scenarios, model.name)
    return solve_bnc(fixed, None, time_limit=time_limit)


def first_stage_decision(problem: TwoStageProblem, model: MilpModel, point) -> dict:
    return _decision(problem, model, np.asarray(point, float))


def convergence_curve(problem: TwoStageProblem, sizes: Sequence[int], mode: str = "fast_forward",
                      repeats: int = 25, seed: int = 0, time_limit: float = 120.0) -> list[dict]:
    """Objective of the full problem after fixing the first stage of a reduced solve.

    Rows carry ``size``, ``min``, ``mean``, ``max`` and ``runs``; for
    fast-forward mode the three statistics coincide.
    """
    if mode not in ("fast_forward", "random"):
        raise ValueError(f"unknown mode {mode!r}")
    S = problem.num_scenarios
    if any(not 1 <= k <= S for k in sizes):
        raise ValueError(f"sizes must lie in [1, {S}]")
    d = problem.distances()
    p = problem.scenario_set.probabilities
    rng = np.random.default_rng(seed)
    cache: dict = {}

    def evaluate(reduction):
        model = problem.reduced_model(reduction)
        rep = solve_bnc(model, None, time_limit=time_limit)
        if rep.point is None:
            return math.inf
        dec = _decision(problem, model, rep.point)
        key = tuple(sorted(dec.items()))
        if key not in cache:
            cache[key] = fix_first_stage_and_resolve(problem, dec, time_limit).objective
        return cache[key]

    rows = []
    for k in sizes:
        if mode == "fast_forward":
            vals = [evaluate(fast_forward_select(d, p, k))]
        else:
            vals = [evaluate(random_select(p, k, rng, d)) for _ in range(repeats)]
        rows.append({"size": k, "min": min(vals), "mean": fmean(vals), "max": max(vals),
                     "runs": len(vals)})
    return rows
