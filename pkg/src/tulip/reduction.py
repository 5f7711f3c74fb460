"""Fast-forward scenario selection with nearest-neighbour redistribution."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Reduction:
    selected: tuple[int, ...]            # 0-based indices into the original set, in selection order
    new_probabilities: tuple[float, ...]
    assignment: dict = field(default_factory=dict)   # excluded -> selected


def distance_matrix(count: int, distance) -> np.ndarray:
    """Evaluate a pairwise metric ``distance(i, j)`` on all 0-based pairs."""
    d = np.zeros((count, count))
    for i in range(count):
        for j in range(count):
            if i != j:
                d[i, j] = float(distance(i, j))
    if (d < 0).any():
        raise ValueError("distances must be non-negative")
    return d


def _nearest(d, j, selected):
    # selected is iterated in ascending index order so ties go to the lowest
    best, arg = math.inf, -1
    for i in sorted(selected):
        if d[j, i] < best:
            best, arg = d[j, i], i
    return arg


def redistribute(d, p, selected) -> Reduction:
    """Give each excluded scenario's mass to its nearest selected scenario."""
    d = np.asarray(d, float)
    chosen = set(selected)
    mass = {i: float(p[i]) for i in selected}
    assignment = {}
    for j in range(len(p)):
        if j in chosen:
            continue
        i = _nearest(d, j, chosen)
        assignment[j] = i
        mass[i] += float(p[j])
    total = math.fsum(mass.values())
    probs = tuple(mass[i] / total for i in selected)
    return Reduction(tuple(selected), probs, assignment)


def fast_forward_select(d, p, target: int) -> Reduction:
    d = np.asarray(d, float)
    p = np.asarray(p, float)
    S = len(p)
    if d.shape != (S, S):
        raise ValueError("distance matrix shape does not match probabilities")
    if not 1 <= target <= S:
        raise ValueError(f"target must lie in [1, {S}], got {target}")
    cost = d.copy()
    remaining = list(range(S))
    selected: list[int] = []
    for _ in range(target):
        best, arg = math.inf, -1
        for u in remaining:
            # cost[j, u] already holds min(d(j,u), min_{i in J} d(j,i))
            val = sum(p[j] * cost[j, u] for j in remaining if j != u)
            if val < best:
                best, arg = val, u
        selected.append(arg)
        remaining.remove(arg)
        for j in remaining:
            cost[j, :] = np.minimum(cost[j, :], cost[j, arg])
    return redistribute(d, p, selected)


def random_select(p, target: int, rng, d=None) -> Reduction:
    """Uniform random subset; probabilities follow ``d`` if given, else renormalize."""
    S = len(p)
    if not 1 <= target <= S:
        raise ValueError(f"target must lie in [1, {S}], got {target}")
    chosen = sorted(int(i) for i in rng.choice(S, size=target, replace=False))
    if d is not None:
        return redistribute(d, p, chosen)
    total = math.fsum(p[i] for i in chosen)
    return Reduction(tuple(chosen), tuple(p[i] / total for i in chosen), {})


def transport_cost(d, p, selected) -> float:
    d = np.asarray(d, float)
    chosen = set(selected)
    return math.fsum(p[j] * min(d[j, i] for i in chosen) for j in range(len(p)) if j not in chosen)


def reduction_fraction_to_target(S: int, fraction: float) -> int:
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    return max(1, round(fraction * S))
