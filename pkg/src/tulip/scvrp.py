"""Stochastic capacitated vehicle routing: model, separators, instances."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

import numpy as np

from .core import EQ, GE, LE, Cut, ModelBuilder, ParseError, ScenarioSet, SparseRow
from .driver import TwoStageProblem
from .maxflow import max_flow


@dataclass(frozen=True)
class VrpBase:
    """A deterministic CVRP: depot 0, symmetric distances, one demand vector."""

    dist: np.ndarray
    capacity: float
    demands: tuple[float, ...]     # length n+1, demands[0] == 0
    name: str = ""

    @property
    def n_plus_1(self) -> int:
        return len(self.demands)


@dataclass(frozen=True, eq=False)
class ScvrpInstance:
    dist: np.ndarray
    capacity: float
    scenarios: ScenarioSet          # payload[s] = demand vector of length n+1
    name: str = ""

    def __post_init__(self):
        d = np.asarray(self.dist, float)
        n1 = d.shape[0]
        if d.shape != (n1, n1) or n1 < 2:
            raise ValueError("distance matrix must be square with at least 2 vertices")
        if not np.allclose(d, d.T, atol=1e-9) or np.any(np.diag(d) != 0):
            raise ValueError("distances must be symmetric with zero diagonal")
        off = d[~np.eye(n1, dtype=bool)]
        if np.any(off <= 0):
            raise ValueError("distances between distinct cities must be positive")
        if self.capacity <= 0:
            raise ValueError("capacity must be positive")
        for b in self.scenarios.payload:
            if len(b) != n1 or b[0] != 0 or any(v <= 0 for v in b[1:]):
                raise ValueError("each demand vector needs b_0 = 0 and b_i > 0 for cities")
            if max(b) > self.capacity:
                raise ValueError("capacity must cover every single demand")

    @property
    def n_plus_1(self) -> int:
        return self.dist.shape[0]

    @property
    def num_scenarios(self) -> int:
        return len(self.scenarios)

    def demand(self, s: int) -> tuple:
        """Demand vector of 1-based scenario ``s``."""
        return self.scenarios.payload[s - 1]


def arcs(n1: int):
    return [(i, j) for i in range(n1) for j in range(n1) if i != j]


# -- model -------------------------------------------------------------------

def _degree_rows(mb, col, n1):
    for i in range(1, n1):
        mb.add_row({col[i, j]: 1.0 for j in range(n1) if j != i}, EQ, 1)
        mb.add_row({col[j, i]: 1.0 for j in range(n1) if j != i}, EQ, 1)
    mb.add_row({col[0, j]: 1.0 for j in range(1, n1)}, GE, 1)
    mb.add_row({col[j, 0]: 1.0 for j in range(1, n1)}, GE, 1)


def build_scvrp_model(inst: ScvrpInstance, scenarios=None, probabilities=None):
    """First-stage route x plus one recourse route y^(s) per scenario.

    ``scenarios`` are 1-based indices of the instance's scenarios; the default
    is all of them with their own probabilities.
    """
    if scenarios is None:
        scenarios = tuple(range(1, inst.num_scenarios + 1))
        probabilities = inst.scenarios.probabilities
    n1 = inst.n_plus_1
    d = np.asarray(inst.dist, float)
    mb = ModelBuilder()
    xcol = {(i, j): mb.add_var((0, ("x", i, j))) for i, j in arcs(n1)}
    ycol = {}
    for s, p in zip(scenarios, probabilities):
        ycol[s] = {(i, j): mb.add_var((s, ("y", i, j)), p * d[i, j]) for i, j in arcs(n1)}
    _degree_rows(mb, xcol, n1)
    for s in scenarios:
        _degree_rows(mb, ycol[s], n1)
        for i in range(1, n1):
            for j in range(1, n1):
                if i != j:
                    mb.add_row({ycol[s][i, j]: 1.0, xcol[i, j]: -1.0}, LE, 0)
    seps = (SubtourSeparator(n1, xcol), CapacitySeparator(inst, xcol, ycol))
    return mb.build(seps, scenarios, inst.name)


# -- separation --------------------------------------------------------------

def _components(n1, weight, threshold, skip_depot=True):
    """Undirected components of the arcs with weight > threshold."""
    parent = list(range(n1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for (i, j), w in weight.items():
        if w > threshold and not (skip_depot and (i == 0 or j == 0)):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for v in range(1 if skip_depot else 0, n1):
        groups.setdefault(find(v), []).append(v)
    return [frozenset(g) for g in groups.values()]


def _flow_sets(n1, weight):
    """Vertex sets Q of cities with the least outflow towards the depot."""
    a = list(weight)
    caps = [max(0.0, weight[e]) for e in a]
    out = []
    for k in range(1, n1):
        val, src_side, back = max_flow(a, caps, k, 0, n1)
        for side in {src_side, back}:
            out.append((val, frozenset(side)))
    return out


class SubtourSeparator:
    """sum_{i,j in Q} x_ij <= |Q| - 1 for city sets Q on the first-stage route."""

    origin = "subtour"

    def __init__(self, n1, xcol):
        self.n1, self.xcol = n1, xcol

    def cut(self, Q):
        row = SparseRow.make({self.xcol[i, j]: 1.0 for i in Q for j in Q if i != j})
        return Cut(row, LE, len(Q) - 1, self.origin, 0, tuple(sorted(Q)))

    def __call__(self, model, point, integral):
        xv = {e: point[c] for e, c in self.xcol.items()}
        if integral:
            sets = [Q for Q in _components(self.n1, xv, 0.5, skip_depot=False) if 0 not in Q]
        else:
            sets = [Q for val, Q in _flow_sets(self.n1, xv) if val < 1 - 1e-6]
        cuts, seen = [], set()
        for Q in sets:
            if Q in seen or len(Q) < 2:
                continue
            seen.add(Q)
            inside = sum(xv[i, j] for i in Q for j in Q if i != j)
            if inside > len(Q) - 1 + 1e-6:
                cuts.append(self.cut(Q))
        return cuts


def capacity_rhs(demands, Q, capacity) -> float:
    total = math.fsum(demands[i] for i in Q)
    return 2.0 * math.ceil(total / capacity - 1e-9)


class CapacitySeparator:
    """sum over arcs crossing Q of y^(s) >= 2 ceil(b^(s)(Q) / C), Q a set of cities."""

    origin = "capacity"

    def __init__(self, inst, xcol, ycol):
        self.inst, self.xcol, self.ycol = inst, xcol, ycol
        self.n1 = inst.n_plus_1

    def cut(self, s, Q):
        col = self.ycol[s]
        terms = {}
        for i in Q:
            for j in range(self.n1):
                if j not in Q:
                    terms[col[i, j]] = 1.0
                    terms[col[j, i]] = 1.0
        rhs = capacity_rhs(self.inst.demand(s), Q, self.inst.capacity)
        return Cut(SparseRow.make(terms), GE, rhs, self.origin, s, tuple(sorted(Q)))

    def _candidates(self, s, point, integral):
        yv = {e: point[c] for e, c in self.ycol[s].items()}
        if integral:
            return _components(self.n1, yv, 0.5)
        xv = {e: point[c] for e, c in self.xcol.items()}
        sets = set()
        for t in (1e-6, 0.25, 0.5, 0.75):
            sets.update(_components(self.n1, xv, t))
            sets.update(_components(self.n1, yv, t))
        sets.update(Q for val, Q in _flow_sets(self.n1, yv) if val < 1 - 1e-6)
        return sets

    def __call__(self, model, point, integral):
        cuts = []
        for s in model.scenarios:
            b = self.inst.demand(s)
            for Q in sorted(self._candidates(s, point, integral), key=sorted):
                if not Q or 0 in Q:
                    continue
                col = self.ycol[s]
                cross = sum(point[col[i, j]] + point[col[j, i]]
                            for i in Q for j in range(self.n1) if j not in Q)
                if cross < capacity_rhs(b, Q, self.inst.capacity) - 1e-6:
                    cuts.append(self.cut(s, Q))
        return cuts


# -- scenarios ---------------------------------------------------------------

def lognormal_params(mean: float, variance: float) -> tuple[float, float]:
    """(mu, sigma^2) of the lognormal with the given mean and variance."""
    sigma2 = math.log(1.0 + variance / mean ** 2)
    return math.log(mean) - sigma2 / 2.0, sigma2


def generate_demands(base: VrpBase, alpha: float, S: int, seed: int) -> ScvrpInstance:
    """Equiprobable lognormal demand scenarios with variance alpha * mean."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if S < 1:
        raise ValueError("need at least one scenario")
    B = np.asarray(base.demands[1:], float)
    if np.any(B <= 0):
        raise ValueError("base demands must be positive")
    rng = np.random.default_rng(seed)
    mu, sigma2 = zip(*(lognormal_params(m, alpha * m) for m in B))
    draws = rng.lognormal(np.asarray(mu), np.sqrt(np.asarray(sigma2)), size=(S, len(B)))
    if np.all(B == np.round(B)) and np.all(B >= 10):
        draws = np.maximum(1.0, np.round(draws))
    capacity = max(float(base.capacity), float(draws.max()))
    payload = tuple((0.0,) + tuple(float(v) for v in row) for row in draws)
    probs = (1.0 / S,) * S
    return ScvrpInstance(np.asarray(base.dist, float), capacity, ScenarioSet(probs, payload),
                         base.name)


def scvrp_distance(inst: ScvrpInstance, i: int, j: int) -> float:
    """L1 distance between the demand vectors of 0-based scenarios i and j."""
    bi, bj = inst.scenarios.payload[i], inst.scenarios.payload[j]
    return math.fsum(abs(a - b) for a, b in zip(bi, bj))


def random_base(n_plus_1: int, seed: int, grid: int = 100, max_demand: int = 9,
                capacity: float | None = None) -> VrpBase:
    """Random Euclidean instance on integer coordinates (distances rounded, min 1)."""
    rng = np.random.default_rng(seed)
    pts = rng.choice(grid * grid, size=n_plus_1, replace=False)
    xy = np.stack([pts // grid, pts % grid], axis=1).astype(float)
    d = np.maximum(1.0, np.round(np.linalg.norm(xy[:, None] - xy[None], axis=2)))
    np.fill_diagonal(d, 0.0)
    dem = (0.0,) + tuple(float(v) for v in rng.integers(1, max_demand + 1, size=n_plus_1 - 1))
    if capacity is None:
        capacity = max(max(dem), math.ceil(sum(dem) / 2))
    return VrpBase(d, float(capacity), dem, f"rand{n_plus_1}-{seed}")


# -- TSPLIB subset -----------------------------------------------------------
#
# Header lines are "KEY : value" (colon optional).  Recognised keys: NAME,
# COMMENT, TYPE, DIMENSION, CAPACITY, EDGE_WEIGHT_TYPE (EUC_2D | EXPLICIT),
# EDGE_WEIGHT_FORMAT (FULL_MATRIX | UPPER_ROW | LOWER_ROW | UPPER_DIAG_ROW |
# LOWER_DIAG_ROW).  Sections: NODE_COORD_SECTION ("id x y" per node),
# EDGE_WEIGHT_SECTION (whitespace-separated numbers), DEMAND_SECTION
# ("id demand"), DEPOT_SECTION (ids terminated by -1).  EOF is optional.
# Node ids are 1-based; the (first) depot becomes vertex 0 and the remaining
# nodes keep their file order.

_HEADER = {"NAME", "COMMENT", "TYPE", "DIMENSION", "CAPACITY", "EDGE_WEIGHT_TYPE",
           "EDGE_WEIGHT_FORMAT", "DISPLAY_DATA_TYPE", "NODE_COORD_TYPE"}
_SECTIONS = {"NODE_COORD_SECTION", "EDGE_WEIGHT_SECTION", "DEMAND_SECTION", "DEPOT_SECTION"}


def _explicit_matrix(fmt, values, n, line):
    d = np.zeros((n, n))
    it = iter(values)
    try:
        if fmt == "FULL_MATRIX":
            for i in range(n):
                for j in range(n):
                    d[i, j] = next(it)
            return d
        pairs = {
            "UPPER_ROW": [(i, j) for i in range(n) for j in range(i + 1, n)],
            "LOWER_ROW": [(i, j) for i in range(n) for j in range(i)],
            "UPPER_DIAG_ROW": [(i, j) for i in range(n) for j in range(i, n)],
            "LOWER_DIAG_ROW": [(i, j) for i in range(n) for j in range(i + 1)],
        }.get(fmt)
        if pairs is None:
            raise ParseError(f"unsupported EDGE_WEIGHT_FORMAT {fmt!r}", line)
        for i, j in pairs:
            d[i, j] = d[j, i] = next(it)
    except StopIteration:
        raise ParseError("EDGE_WEIGHT_SECTION has too few entries", line) from None
    return d


def parse_tsplib_vrp(text: str) -> VrpBase:
    head: dict = {}
    coords, weights, demands, depots = {}, [], {}, []
    section, weight_line = None, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        key = re.split(r"[\s:]", line, maxsplit=1)[0].upper()
        if key == "EOF":
            break
        if key in _SECTIONS:
            section = key
            if key == "EDGE_WEIGHT_SECTION":
                weight_line = lineno
            continue
        if key in _HEADER:
            section = None
            value = line[len(key):].strip().lstrip(":").strip()
            head[key] = (value, lineno)
            continue
        tok = line.split()
        try:
            if section == "NODE_COORD_SECTION":
                if len(tok) != 3:
                    raise ValueError("expected 'id x y'")
                coords[int(tok[0])] = (float(tok[1]), float(tok[2]))
            elif section == "EDGE_WEIGHT_SECTION":
                weights.extend(float(t) for t in tok)
            elif section == "DEMAND_SECTION":
                if len(tok) != 2:
                    raise ValueError("expected 'id demand'")
                demands[int(tok[0])] = float(tok[1])
            elif section == "DEPOT_SECTION":
                for t in tok:
                    if int(t) != -1:
                        depots.append(int(t))
            else:
                raise ValueError(f"unexpected content {line!r}")
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None

    def need(k):
        if k not in head:
            raise ParseError(f"missing {k}")
        return head[k]

    dim, cap = need("DIMENSION"), need("CAPACITY")
    try:
        n = int(dim[0])
    except ValueError:
        raise ParseError("DIMENSION is not an integer", dim[1]) from None
    try:
        capacity = float(cap[0])
    except ValueError:
        raise ParseError("CAPACITY is not a number", cap[1]) from None
    if not demands:
        raise ParseError("missing DEMAND_SECTION")
    if not depots:
        raise ParseError("missing DEPOT_SECTION")
    ids = list(range(1, n + 1))
    if sorted(demands) != ids:
        raise ParseError("DEMAND_SECTION must list every node exactly once")
    kind = head.get("EDGE_WEIGHT_TYPE", ("EUC_2D" if coords else "EXPLICIT", None))
    if kind[0] == "EUC_2D":
        if sorted(coords) != ids:
            raise ParseError("NODE_COORD_SECTION must list every node exactly once")
        xy = np.array([coords[i] for i in ids])
        d = np.floor(np.linalg.norm(xy[:, None] - xy[None], axis=2) + 0.5)
    elif kind[0] == "EXPLICIT":
        if weight_line is None:
            raise ParseError("missing EDGE_WEIGHT_SECTION")
        fmt = head.get("EDGE_WEIGHT_FORMAT", ("FULL_MATRIX", None))[0]
        d = _explicit_matrix(fmt, weights, n, weight_line)
    else:
        raise ParseError(f"unsupported EDGE_WEIGHT_TYPE {kind[0]!r}", kind[1])
    depot = depots[0]
    if depot not in demands:
        raise ParseError(f"depot {depot} is not a node")
    order = [depot - 1] + [i - 1 for i in ids if i != depot]
    d = d[np.ix_(order, order)]
    dem = tuple(float(demands[i + 1]) for i in order)
    if dem[0] != 0:
        raise ParseError("depot demand must be 0")
    name = head.get("NAME", ("", None))[0]
    return VrpBase(d, capacity, dem, name)


# -- sidecar and JSON --------------------------------------------------------

def read_scenarios(text: str, n_cities: int) -> ScenarioSet:
    """Sidecar format: one line per scenario, 'p b_1 ... b_n'."""
    probs, payload = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        tok = raw.split("#", 1)[0].split()
        if not tok:
            continue
        if len(tok) != n_cities + 1:
            raise ParseError(f"expected {n_cities + 1} numbers, got {len(tok)}", lineno)
        try:
            vals = [float(t) for t in tok]
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        probs.append(vals[0])
        payload.append((0.0,) + tuple(vals[1:]))
    return ScenarioSet(tuple(probs), tuple(payload))


def write_scenarios(scen: ScenarioSet) -> str:
    return "".join(" ".join(repr(float(v)) for v in (p, *b[1:])) + "\n"
                   for p, b in zip(scen.probabilities, scen.payload))


def instance_to_json(inst: ScvrpInstance) -> str:
    doc = {"problem": "scvrp", "name": inst.name, "capacity": inst.capacity,
           "dist": np.asarray(inst.dist, float).tolist(),
           "probabilities": list(inst.scenarios.probabilities),
           "demands": [list(b) for b in inst.scenarios.payload]}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def instance_from_json(text: str) -> ScvrpInstance:
    doc = json.loads(text)
    if doc.get("problem") != "scvrp":
        raise ValueError("not an SCVRP instance file")
    scen = ScenarioSet(tuple(doc["probabilities"]), tuple(tuple(b) for b in doc["demands"]))
    return ScvrpInstance(np.asarray(doc["dist"], float), float(doc["capacity"]), scen,
                         doc.get("name", ""))


def scvrp_problem(inst: ScvrpInstance) -> TwoStageProblem:
    return TwoStageProblem(
        scenario_set=inst.scenarios,
        build_model=lambda sc, pr: build_scvrp_model(inst, tuple(sc), tuple(pr)),
        distance=lambda i, j: scvrp_distance(inst, i, j),
        name=inst.name)
