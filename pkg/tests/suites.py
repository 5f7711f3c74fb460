"""Seeded instance families shared by the unit and acceptance tests."""
from __future__ import annotations

import math

import numpy as np

from tulip.core import LinearProgram, ScenarioSet, SparseRow
from tulip.scvrp import ScvrpInstance, generate_demands, random_base
from tulip.ssfp import random_ssfp_instance

ALPHAS = (0.05, 0.25, 0.75)
SCVRP_SCENARIOS = (2, 4, 5)

# Depot 0 and cities 1-4 of the four-city recourse example.  The matrix is a
# metric chosen so that the optimal route uses the depot-city-3 edge and the
# high-demand scenario splits the route right after city 3's neighbour.
TOY_ROUTE_DIST = np.array([[0, 150, 210, 120, 110],
                      [150, 0, 150, 180, 50],
                      [210, 150, 0, 110, 200],
                      [120, 180, 110, 0, 130],
                      [110, 50, 200, 130, 0]], float)
TOY_ROUTE_DEMANDS = ((0.0, 2.0, 2.0, 1.0, 2.0), (0.0, 2.0, 2.0, 7.0, 2.0))
TOY_ROUTE_CAPACITY = 10.0


def toy_route_instance() -> ScvrpInstance:
    return ScvrpInstance(TOY_ROUTE_DIST, TOY_ROUTE_CAPACITY,
                         ScenarioSet((0.5, 0.5), TOY_ROUTE_DEMANDS), "toy_route")


def scvrp_suite():
    """30 instances: |V| in 5..7, S cycles through 2/4/5, alpha through the three levels."""
    out = []
    for seed in range(30):
        n1 = 5 + seed % 3
        S = SCVRP_SCENARIOS[seed % 3]
        alpha = ALPHAS[(seed // 3) % 3]
        out.append(generate_demands(random_base(n1, 100 + seed, max_demand=6), alpha, S, seed))
    return out


def ssfp_suite():
    """15 instances with 6-8 vertices and 2-4 scenarios."""
    return [random_ssfp_instance(6 + i % 3, 2 + i % 3, 1000 + i) for i in range(15)]


def tiny_scvrp(seed: int) -> ScvrpInstance:
    """|V| <= 5 and S <= 3 with integer demands, for exhaustive enumeration."""
    rng = np.random.default_rng(seed)
    n1 = 4 + seed % 2
    S = 1 + seed % 3
    base = random_base(n1, 500 + seed, max_demand=5)
    cap = float(rng.integers(5, 11))
    payload = tuple((0.0,) + tuple(float(v) for v in rng.integers(1, 6, size=n1 - 1))
                    for _ in range(S))
    w = rng.integers(1, 4, size=S).astype(float)
    probs = tuple(float(v) for v in w / w.sum())
    probs = probs[:-1] + (1.0 - math.fsum(probs[:-1]),)
    return ScvrpInstance(base.dist, cap, ScenarioSet(probs, payload), f"tiny{seed}")


def random_lp(rng, max_vars=8, max_rows=8, infinite_bounds=False):
    """Integer-data LP; most draws are made feasible by anchoring rows at a box point.

    Returns the LinearProgram plus dense (c, lower, upper, A, senses, b).
    """
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(0, max_rows + 1))
    A = rng.integers(-5, 6, size=(m, n)).astype(float)
    c = rng.integers(-5, 6, size=n).astype(float)
    lo = rng.integers(-3, 1, size=n).astype(float)
    up = lo + rng.integers(0, 6, size=n)
    if infinite_bounds:
        up = np.where(rng.random(n) < 0.3, math.inf, up)
    senses = [str(rng.choice(["<=", ">=", "="], p=[0.45, 0.45, 0.1])) for _ in range(m)]
    if rng.random() < 0.75:
        anchor = rng.integers(lo, np.where(np.isfinite(up), up, lo + 5) + 1).astype(float)
        act = A @ anchor
        slack = rng.integers(0, 4, size=m)
        b = np.array([act[i] + slack[i] if s == "<=" else act[i] - slack[i] if s == ">=" else act[i]
                      for i, s in enumerate(senses)], float)
    else:
        b = rng.integers(-5, 6, size=m).astype(float)
    rows = tuple(SparseRow.make({j: A[i, j] for j in range(n)}) for i in range(m))
    lp = LinearProgram(n, tuple(c), tuple(lo), tuple(up), rows, tuple(senses), tuple(b))
    return lp, (c, lo, up, A, senses, b)


def random_digraph(rng, max_vertices=7, max_cap=5):
    n = int(rng.integers(2, max_vertices + 1))
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    keep = rng.random(len(pairs)) < rng.uniform(0.2, 0.8)
    arcs = [a for a, k in zip(pairs, keep) if k]
    caps = [int(c) for c in rng.integers(0, max_cap + 1, size=len(arcs))]
    s, t = (int(v) for v in rng.choice(n, 2, replace=False))
    return n, arcs, caps, s, t


def ssfp_oracle_args(inst):
    """(num_vertices, edges, num_types, first, scenarios) in the enumeration oracle's layout."""
    def tup(st):
        return (st.groups, st.types, st.costs, st.edges)
    scen = [(p, tup(st)) for p, st in zip(inst.scenarios.probabilities, inst.scenarios.payload)]
    return inst.num_vertices, inst.edges, inst.num_types, tup(inst.first_stage), scen
