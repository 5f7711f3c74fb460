"""Two-stage stochastic Steiner forest: cut and flow models, separation, instances.

Vertices, edges, connection types and terminal groups are all 0-based.  The
root of a terminal group is its smallest vertex.  Each stage (first stage or
scenario) carries its own groups, usable connection types, usable edges and
cost table ``costs[m][e]``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import EQ, GE, LE, Cut, ModelBuilder, ParseError, ScenarioSet, SparseRow
from .driver import TwoStageProblem
from .maxflow import max_flow

CREEP = 1e-6
CONNECTIVITY_VIOL = 1e-4


@dataclass(frozen=True)
class Stage:
    groups: tuple[tuple[int, ...], ...]
    types: tuple[int, ...]
    costs: tuple[tuple[float, ...], ...]       # costs[m][e] for every type m
    edges: tuple[int, ...] | None = None        # usable edge indices; None means all

    def __post_init__(self):
        groups = tuple(tuple(sorted(set(int(v) for v in g))) for g in self.groups)
        if any(not g for g in groups):
            raise ValueError("terminal groups must be non-empty")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "types", tuple(sorted(set(int(m) for m in self.types))))
        object.__setattr__(self, "costs", tuple(tuple(float(c) for c in row) for row in self.costs))
        if self.edges is not None:
            object.__setattr__(self, "edges", tuple(sorted(set(int(e) for e in self.edges))))

    @property
    def roots(self) -> tuple[int, ...]:
        return tuple(g[0] for g in self.groups)

    def terminals(self) -> frozenset:
        return frozenset(v for g in self.groups for v in g)


@dataclass(frozen=True)
class SsfpInstance:
    num_vertices: int
    edges: tuple[tuple[int, int], ...]
    num_types: int
    first_stage: Stage
    scenarios: ScenarioSet                      # payload: one Stage per scenario
    name: str = ""

    def __post_init__(self):
        edges = tuple((min(int(u), int(v)), max(int(u), int(v))) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        n = self.num_vertices
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edge")
        for u, v in edges:
            if u == v or not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"bad edge ({u}, {v})")
        for st in self.stages():
            if len(st.costs) != self.num_types or any(len(r) != len(edges) for r in st.costs):
                raise ValueError("cost table must be num_types x num_edges")
            if any(c < 0 or not math.isfinite(c) for r in st.costs for c in r):
                raise ValueError("costs must be finite and non-negative")
            if any(not 0 <= m < self.num_types for m in st.types):
                raise ValueError("usable type out of range")
            if any(not 0 <= v < n for g in st.groups for v in g):
                raise ValueError("terminal out of range")
            if st.edges is not None and any(not 0 <= e < len(edges) for e in st.edges):
                raise ValueError("usable edge out of range")

    @property
    def num_scenarios(self) -> int:
        return len(self.scenarios)

    def stage(self, s: int) -> Stage:
        """Stage 0 is the first stage; s >= 1 is scenario s."""
        return self.first_stage if s == 0 else self.scenarios.payload[s - 1]

    def stages(self):
        return (self.first_stage,) + tuple(self.scenarios.payload)

    def usable_edges(self, s: int) -> tuple[int, ...]:
        st = self.stage(s)
        return tuple(range(len(self.edges))) if st.edges is None else st.edges


# ---------------------------------------------------------------- models

@dataclass
class _StageColumns:
    arcs: list                                   # (u, v) pairs of usable arcs
    yk: dict = field(default_factory=dict)       # k -> list over arcs of [cols per type]
    z: dict = field(default_factory=dict)        # (k, l) -> col


def _build(inst: SsfpInstance, scenarios, probabilities, flow: bool):
    if scenarios is None:
        scenarios = tuple(range(1, inst.num_scenarios + 1))
        probabilities = inst.scenarios.probabilities
    scenarios, probabilities = tuple(scenarios), tuple(probabilities or ())
    if len(scenarios) != len(probabilities):
        raise ValueError("one probability per scenario required")
    mb = ModelBuilder()
    nE, nM = len(inst.edges), inst.num_types

    x = {}
    for s in (0,) + scenarios:
        st = inst.stage(s)
        for m in range(nM):
            for e in range(nE):
                if s == 0:
                    cost = st.costs[m][e] - math.fsum(
                        p * inst.stage(t).costs[m][e] for t, p in zip(scenarios, probabilities))
                else:
                    cost = probabilities[scenarios.index(s)] * st.costs[m][e]
                x[s, m, e] = mb.add_var((s, ("x", m, e)), cost)
    for s in scenarios:
        for m in range(nM):
            for e in range(nE):
                mb.add_row({x[s, m, e]: 1.0, x[0, m, e]: -1.0}, GE, 0.0)

    columns = {s: _add_stage(mb, inst, s, x, flow) for s in (0,) + scenarios}
    seps = () if flow else (ConnectivitySeparator(inst, columns),)
    kind = "flow" if flow else "cut"
    return mb.build(seps, scenarios, f"{inst.name}:{kind}" if inst.name else kind)


def _add_stage(mb, inst, s, x, flow):
    st = inst.stage(s)
    groups, roots, types = st.groups, st.roots, st.types
    K = len(groups)
    arcs, arc_edge = [], []
    for e in inst.usable_edges(s):
        u, v = inst.edges[e]
        arcs += [(u, v), (v, u)]
        arc_edge += [e, e]
    cols = _StageColumns(arcs)
    relax_y = flow          # f carries integrality in the flow model

    ym = {(m, a): mb.add_var((s, ("y", m) + arcs[a]), integral=not relax_y)
          for m in types for a in range(len(arcs))}
    for k in range(K):
        cols.yk[k] = [[mb.add_var((s, ("yk", k, m) + arcs[a]), integral=not relax_y)
                       for m in types] for a in range(len(arcs))]
    for k in range(K):
        for l in range(k, K):
            cols.z[k, l] = mb.add_var((s, ("z", k, l)))

    into = {v: [] for v in range(inst.num_vertices)}
    out = {v: [] for v in range(inst.num_vertices)}
    for a, (u, v) in enumerate(arcs):
        into[v].append(a)
        out[u].append(a)

    # each arc serves at most the arborescences that use it
    for mi, m in enumerate(types):
        for a in range(len(arcs)):
            terms = {cols.yk[k][a][mi]: 1.0 for k in range(K)}
            terms[ym[m, a]] = -1.0
            mb.add_row(terms, LE, 0.0)
    # an edge carries at most one direction, and only if installed
    for m in types:
        for a in range(0, len(arcs), 2):
            mb.add_row({ym[m, a]: 1.0, ym[m, a + 1]: 1.0, x[s, m, arc_edge[a]]: -1.0}, LE, 0.0)
    # each group is served by exactly one root of index <= its own
    for k in range(K):
        mb.add_row({cols.z[l, k]: 1.0 for l in range(k + 1)}, EQ, 1.0)
    for k in range(K):
        for l in range(k + 1, K):
            mb.add_row({cols.z[k, l]: 1.0, cols.z[k, k]: -1.0}, LE, 0.0)
    for v in range(inst.num_vertices):
        mb.add_row({ym[m, a]: 1.0 for m in types for a in into[v]}, LE, 1.0)
    # arborescence k never enters terminals of earlier groups
    for k in range(1, K):
        earlier = set().union(*groups[:k]) - {roots[k]}
        for t in sorted(earlier):
            mb.add_row({c: 1.0 for a in into[t] for c in cols.yk[k][a]}, EQ, 0.0)
    terminals = st.terminals()
    for v in range(inst.num_vertices):
        if v in terminals:
            continue
        terms = {}
        for m in types:
            for a in into[v]:
                terms[ym[m, a]] = terms.get(ym[m, a], 0.0) + 1.0
            for a in out[v]:
                terms[ym[m, a]] = terms.get(ym[m, a], 0.0) - 1.0
        mb.add_row(terms, LE, 0.0)
    for k in range(K):
        served = set().union(*groups[k:]) - {roots[k]}
        for v in range(inst.num_vertices):
            if v in served:
                continue
            terms = {}
            for a in into[v]:
                for c in cols.yk[k][a]:
                    terms[c] = terms.get(c, 0.0) + 1.0
            for a in out[v]:
                for c in cols.yk[k][a]:
                    terms[c] = terms.get(c, 0.0) - 1.0
            mb.add_row(terms, LE, 0.0)
    # arborescence k may pass through root r^l only when it serves group l
    for k in range(K - 1):
        for l in range(k + 1, K):
            for mi in range(len(types)):
                terms = {cols.yk[k][a][mi]: 1.0 for a in into[roots[l]]}
                if terms:
                    terms[cols.z[k, l]] = -1.0
                    mb.add_row(terms, LE, 0.0)

    if flow:
        _add_flows(mb, s, st, cols, into, out)
    return cols


def _commodities(st, k):
    """(l, t) pairs the root of group k must reach when it serves group l."""
    r = st.roots[k]
    return [(l, t) for l in range(k, len(st.groups)) for t in st.groups[l] if t != r]


def _add_flows(mb, s, st, cols, into, out):
    types = st.types
    arcs = cols.arcs
    for k in range(len(st.groups)):
        r = st.roots[k]
        for l, t in _commodities(st, k):
            f = [[mb.add_var((s, ("f", k, l, t, m) + arcs[a])) for m in types]
                 for a in range(len(arcs))]
            for a in range(len(arcs)):
                for mi in range(len(types)):
                    mb.add_row({f[a][mi]: 1.0, cols.yk[k][a][mi]: -1.0}, LE, 0.0)
            for v in into:
                terms = {}
                for a in out[v]:
                    for c in f[a]:
                        terms[c] = 1.0
                for a in into[v]:
                    for c in f[a]:
                        terms[c] = -1.0
                if v == r:
                    terms[cols.z[k, l]] = -1.0
                elif v == t:
                    terms[cols.z[k, l]] = 1.0
                mb.add_row(terms, EQ, 0.0)
            mb.add_row({c: 1.0 for a in out[t] for c in f[a]}, EQ, 0.0)


def build_ssfp_cut_model(inst: SsfpInstance, scenarios=None, probabilities=None):
    """Cut-based model with lazily separated connectivity.

    ``scenarios`` are 1-based; ``scenarios=()`` keeps the first stage only.
    """
    return _build(inst, scenarios, probabilities, flow=False)


def build_ssfp_flow_model(inst: SsfpInstance, scenarios=None, probabilities=None):
    """Compact multi-commodity flow model with the same optimum as the cut model."""
    return _build(inst, scenarios, probabilities, flow=True)


# ------------------------------------------------------------ separation

class ConnectivitySeparator:
    """Max-flow separation of root-to-terminal cut inequalities.

    For every stage, root k, group l >= k and terminal t of group l, the
    support graph of arborescence k (plus a small creep capacity on every arc)
    must carry ``z_kl`` units from the root to t.  Both the source-side and
    the sink-side minimum cuts are emitted.  Once a cut has been found for
    root k, its arcs are treated as saturated for that root's remaining
    terminals so that later pairs look for different cuts.
    """

    origin = "connectivity"

    def __init__(self, inst: SsfpInstance, columns: dict):
        self.inst = inst
        self.columns = columns

    def cut(self, s, k, l, side):
        cols = self.columns[s]
        terms = {}
        for a, (u, v) in enumerate(cols.arcs):
            if u in side and v not in side:
                for c in cols.yk[k][a]:
                    terms[c] = 1.0
        terms[cols.z[k, l]] = -1.0
        return Cut(SparseRow.make(terms), GE, 0.0, self.origin, s, (k, l))

    def separate_stage(self, s, point):
        st = self.inst.stage(s)
        cols = self.columns[s]
        n = self.inst.num_vertices
        found, seen = [], set()
        for k in range(len(st.groups)):
            cap = [math.fsum(point[c] for c in per_type) + CREEP for per_type in cols.yk[k]]
            r = st.roots[k]
            for l, t in _commodities(st, k):
                zhat = point[cols.z[k, l]]
                if zhat <= CONNECTIVITY_VIOL:
                    continue
                value, src_side, back_side = max_flow(cols.arcs, cap, r, t, n)
                if value >= zhat - CONNECTIVITY_VIOL:
                    continue
                for side in (src_side, back_side):
                    c = self.cut(s, k, l, side)
                    if c.key() not in seen:
                        seen.add(c.key())
                        found.append(c)
                    for a, (u, v) in enumerate(cols.arcs):
                        if u in side and v not in side:
                            cap[a] = max(cap[a], 1.0 + CREEP)
        return found

    def __call__(self, model, point, integral):
        point = np.asarray(point, float)
        out = []
        for s in self.columns:
            out += self.separate_stage(s, point)
        return out


def separate_connectivity(model, point, s=None) -> list:
    """Connectivity cuts violated by ``point`` on a cut model (one stage or all)."""
    sep = next(f for f in model.separators if isinstance(f, ConnectivitySeparator))
    point = np.asarray(point, float)
    if s is None:
        return sep(model, point, False)
    return sep.separate_stage(s, point)


# --------------------------------------------------------------- metrics

def _group_mismatch(gi, gj) -> float:
    return float(sum(min(len(set(a) ^ set(b)) for b in gj) for a in gi)) if gj else \
        float(sum(len(a) for a in gi))


def ssfp_distance(inst: SsfpInstance, i: int, j: int, beta=(1.0, 0.0, 0.0)) -> float:
    """Weighted scenario distance; ``i`` and ``j`` are 0-based scenario indices.

    Combines the Euclidean distance of the cost tables, the symmetrized
    best-match terminal-group mismatch and the size of the symmetric
    difference of usable connection types.
    """
    beta = tuple(float(b) for b in beta)
    if len(beta) != 3 or any(b < 0 for b in beta) or abs(math.fsum(beta) - 1.0) > 1e-9:
        raise ValueError(f"beta must be three non-negative weights summing to 1, got {beta}")
    a, b = inst.scenarios.payload[i], inst.scenarios.payload[j]
    d1 = float(np.linalg.norm(np.asarray(a.costs) - np.asarray(b.costs)))
    d2 = 0.5 * (_group_mismatch(a.groups, b.groups) + _group_mismatch(b.groups, a.groups))
    d3 = float(len(set(a.types) ^ set(b.types)))
    return beta[0] * d1 + beta[1] * d2 + beta[2] * d3


# ------------------------------------------------------------- instances

def toy_forest_instance(p2: float = 0.4) -> SsfpInstance:
    """Four-vertex example A, B, C, D = 0..3 with two connection types.

    Type 1 (index 1) costs twice type 0; second-stage costs double the
    first-stage ones.  The first stage and scenario 1 connect {A, D} with
    both types; scenario 2 connects {A, B} with type 1 only.
    """
    edges = ((0, 2), (0, 3), (1, 2), (2, 3))
    base = (1.0, 1.5, 1.0, 1.0)
    c0 = (base, tuple(2 * c for c in base))
    c2 = tuple(tuple(2 * c for c in row) for row in c0)
    first = Stage(((0, 3),), (0, 1), c0)
    scen = ScenarioSet((1.0 - p2, p2), (Stage(((0, 3),), (0, 1), c2), Stage(((0, 1),), (1,), c2)))
    return SsfpInstance(4, edges, 2, first, scen, "toy_forest")


def random_ssfp_instance(num_vertices: int, num_scenarios: int, seed: int,
                         extra_edges: int | None = None, num_types: int = 2) -> SsfpInstance:
    """Small connected random instance with integer costs."""
    if num_vertices < 3:
        raise ValueError("need at least 3 vertices")
    rng = np.random.default_rng(seed)
    n = num_vertices
    edges = set()
    order = rng.permutation(n)
    for i in range(1, n):
        u, v = int(order[i]), int(order[rng.integers(i)])
        edges.add((min(u, v), max(u, v)))
    want = n // 2 if extra_edges is None else extra_edges
    tries = 0
    while want > 0 and tries < 100:
        u, v = (int(a) for a in rng.choice(n, 2, replace=False))
        tries += 1
        if (min(u, v), max(u, v)) not in edges:
            edges.add((min(u, v), max(u, v)))
            want -= 1
    edges = tuple(sorted(edges))
    base = rng.integers(1, 10, size=len(edges)).astype(float)
    c0 = tuple(tuple((m + 1) * base) for m in range(num_types))
    all_types = tuple(range(num_types))
    type_sets = [(m,) for m in all_types] + [all_types]

    def groups(count):
        return tuple(tuple(int(v) for v in rng.choice(n, 2, replace=False)) for _ in range(count))

    first = Stage(groups(1), all_types, c0)
    payload = []
    for _ in range(num_scenarios):
        factor = rng.integers(2, 4, size=len(edges)).astype(float)
        cs = tuple(tuple(np.asarray(row) * factor) for row in c0)
        types = type_sets[rng.integers(len(type_sets))]
        payload.append(Stage(groups(int(rng.integers(1, 3))), types, cs))
    w = rng.integers(1, 5, size=num_scenarios).astype(float)
    probs = tuple(float(x) for x in w / w.sum())
    probs = probs[:-1] + (1.0 - math.fsum(probs[:-1]),)
    return SsfpInstance(n, edges, num_types, first, ScenarioSet(probs, tuple(payload)),
                        f"rand{n}v{num_scenarios}s{seed}")


# -------------------------------------------------------------- SteinLib

@dataclass(frozen=True)
class StpData:
    num_vertices: int
    edges: tuple[tuple[int, int], ...]
    costs: tuple[float, ...]
    terminals: tuple[int, ...]
    scenarios: tuple[tuple[float, tuple[tuple[int, ...], ...]], ...] = ()
    name: str = ""


# Accepted layout (keywords are case-insensitive, blank lines ignored):
#   [33D32945 STP File, STP Format Version 1.0]
#   SECTION Comment ... END              name taken from a `Name "..."` line
#   SECTION Graph / Nodes n / Edges m / E u v cost (m times) / END
#   SECTION Terminals / Terminals k / T v (k times) / END
#   SECTION Scenarios / Scenarios N / S prob v v ... [| v v ...] (N times) / END
#   EOF
# Vertex numbers in the file are 1-based.  Other sections are skipped.

def parse_stp(text: str) -> StpData:
    lines = text.splitlines()
    section = None
    name = ""
    n = m_decl = k_decl = s_decl = None
    edges, costs, terms, scen = [], [], [], []

    def ints(tokens, ln):
        try:
            vals = [int(t) for t in tokens]
        except ValueError:
            raise ParseError(f"expected vertex numbers, got {' '.join(tokens)!r}", ln) from None
        if n is None:
            raise ParseError("vertex listed before Nodes", ln)
        if any(not 1 <= v <= n for v in vals):
            raise ParseError("vertex number out of range", ln)
        return [v - 1 for v in vals]

    for ln, raw in enumerate(lines, 1):
        tok = raw.split()
        if not tok:
            continue
        head = tok[0].lower()
        if section is None:
            if head == "section":
                if len(tok) < 2:
                    raise ParseError("SECTION without a name", ln)
                section = tok[1].lower()
            elif head == "eof":
                break
            elif ln == 1 and "stp" in raw.lower():
                pass
            else:
                raise ParseError(f"unexpected text outside a section: {raw.strip()!r}", ln)
            continue
        if head == "end":
            section = None
            continue
        if section == "comment":
            if head == "name":
                name = raw.split(None, 1)[1].strip().strip('"') if len(tok) > 1 else ""
        elif section == "graph":
            if head == "nodes" and len(tok) == 2:
                n = _int(tok[1], ln)
            elif head == "edges" and len(tok) == 2:
                m_decl = _int(tok[1], ln)
            elif head == "e" and len(tok) == 4:
                u, v = ints(tok[1:3], ln)
                if u == v:
                    raise ParseError("self-loop edge", ln)
                c = _float(tok[3], ln)
                if c < 0:
                    raise ParseError("negative edge cost", ln)
                edges.append((min(u, v), max(u, v)))
                costs.append(c)
            else:
                raise ParseError(f"malformed Graph line {raw.strip()!r}", ln)
        elif section == "terminals":
            if head == "terminals" and len(tok) == 2:
                k_decl = _int(tok[1], ln)
            elif head == "t" and len(tok) == 2:
                terms += ints(tok[1:], ln)
            else:
                raise ParseError(f"malformed Terminals line {raw.strip()!r}", ln)
        elif section == "scenarios":
            if head == "scenarios" and len(tok) == 2:
                s_decl = _int(tok[1], ln)
            elif head == "s" and len(tok) >= 3:
                p = _float(tok[1], ln)
                if not p > 0:
                    raise ParseError("scenario probability must be positive", ln)
                groups, cur = [], []
                for t in tok[2:]:
                    if t == "|":
                        groups.append(cur)
                        cur = []
                    else:
                        cur += ints([t], ln)
                groups.append(cur)
                if any(not g for g in groups):
                    raise ParseError("empty terminal group", ln)
                scen.append((p, tuple(tuple(g) for g in groups)))
            else:
                raise ParseError(f"malformed Scenarios line {raw.strip()!r}", ln)
    if section is not None:
        raise ParseError(f"section {section!r} is not closed", len(lines))
    if n is None:
        raise ParseError("missing Nodes")
    if m_decl is not None and m_decl != len(edges):
        raise ParseError(f"Edges says {m_decl} but {len(edges)} E lines found")
    if len(set(edges)) != len(edges):
        raise ParseError("duplicate edge")
    if k_decl is not None and k_decl != len(terms):
        raise ParseError(f"Terminals says {k_decl} but {len(terms)} T lines found")
    if s_decl is not None and s_decl != len(scen):
        raise ParseError(f"Scenarios says {s_decl} but {len(scen)} S lines found")
    if scen:
        total = math.fsum(p for p, _ in scen)
        if abs(total - 1.0) > 1e-6:
            raise ParseError(f"scenario probabilities sum to {total!r}")
        scen = [(p / total, g) for p, g in scen]
    return StpData(n, tuple(edges), tuple(costs), tuple(terms), tuple(scen), name)


def _int(tok, ln):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"expected an integer, got {tok!r}", ln) from None


def _float(tok, ln):
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", ln) from None


def write_stp(data: StpData) -> str:
    out = ["33D32945 STP File, STP Format Version 1.0", "", "SECTION Comment",
           f'Name "{data.name}"', "END", "", "SECTION Graph", f"Nodes {data.num_vertices}",
           f"Edges {len(data.edges)}"]
    out += [f"E {u + 1} {v + 1} {c:g}" for (u, v), c in zip(data.edges, data.costs)]
    out += ["END", "", "SECTION Terminals", f"Terminals {len(data.terminals)}"]
    out += [f"T {t + 1}" for t in data.terminals]
    out += ["END", ""]
    if data.scenarios:
        out += ["SECTION Scenarios", f"Scenarios {len(data.scenarios)}"]
        for p, groups in data.scenarios:
            out.append(f"S {p!r} " + " | ".join(" ".join(str(v + 1) for v in g) for g in groups))
        out += ["END", ""]
    out.append("EOF")
    return "\n".join(out) + "\n"


TYPE_CHOICES = ((0,), (1,), (0, 1))


def adapt_sstp_instance(stp: StpData, seed: int) -> SsfpInstance:
    """Turn a stochastic Steiner tree instance into a two-type forest instance.

    Every scenario gains two extra groups of five random vertices (disjoint
    from each other when the graph has at least ten vertices) and a usable
    type set drawn uniformly from {0}, {1}, {0, 1}.  Type 1 costs twice
    type 0 and scenario costs are twice the first-stage costs.  The first
    stage must connect scenario 1's groups with scenario 1's types.
    """
    n = stp.num_vertices
    if n < 5:
        raise ValueError("need at least 5 vertices to draw the extra terminal groups")
    rng = np.random.default_rng(seed)
    base = np.asarray(stp.costs, float)
    c0 = (tuple(base), tuple(2 * base))
    cs = tuple(tuple(2 * np.asarray(row)) for row in c0)
    scen = stp.scenarios or ((1.0, (tuple(stp.terminals),)),)
    payload = []
    for _, groups in scen:
        if n >= 10:
            pick = [int(v) for v in rng.choice(n, 10, replace=False)]
            extra = (tuple(pick[:5]), tuple(pick[5:]))
        else:
            extra = tuple(tuple(int(v) for v in rng.choice(n, 5, replace=False)) for _ in range(2))
        types = TYPE_CHOICES[int(rng.integers(3))]
        payload.append(Stage(tuple(groups) + extra, types, cs))
    first = Stage(payload[0].groups, payload[0].types, c0)
    probs = tuple(p for p, _ in scen)
    probs = probs[:-1] + (1.0 - math.fsum(probs[:-1]),)
    return SsfpInstance(n, stp.edges, 2, first, ScenarioSet(probs, tuple(payload)),
                        stp.name or "sstp")


def _stage_doc(st: Stage) -> dict:
    return {"groups": [list(g) for g in st.groups], "types": list(st.types),
            "costs": [list(r) for r in st.costs],
            "edges": None if st.edges is None else list(st.edges)}


def _stage_from(doc) -> Stage:
    edges = doc.get("edges")
    return Stage(tuple(tuple(g) for g in doc["groups"]), tuple(doc["types"]),
                 tuple(tuple(r) for r in doc["costs"]), None if edges is None else tuple(edges))


def instance_to_json(inst: SsfpInstance) -> str:
    doc = {"problem": "ssfp", "name": inst.name, "num_vertices": inst.num_vertices,
           "edges": [list(e) for e in inst.edges], "num_types": inst.num_types,
           "first_stage": _stage_doc(inst.first_stage),
           "probabilities": list(inst.scenarios.probabilities),
           "scenarios": [_stage_doc(st) for st in inst.scenarios.payload]}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def instance_from_json(text: str) -> SsfpInstance:
    doc = json.loads(text)
    if doc.get("problem") != "ssfp":
        raise ValueError("not a 2S-SSFP instance file")
    scen = ScenarioSet(tuple(doc["probabilities"]), tuple(_stage_from(d) for d in doc["scenarios"]))
    return SsfpInstance(int(doc["num_vertices"]), tuple(tuple(e) for e in doc["edges"]),
                        int(doc["num_types"]), _stage_from(doc["first_stage"]), scen,
                        doc.get("name", ""))


def first_stage_installs(model) -> list:
    return [j for j, (s, key) in enumerate(model.var_meta) if s == 0 and key[0] == "x"]


def ssfp_problem(inst: SsfpInstance, beta=(1.0, 0.0, 0.0), flow: bool = False) -> TwoStageProblem:
    """Pipeline adapter; the first-stage decision is the set of installations."""
    build = build_ssfp_flow_model if flow else build_ssfp_cut_model
    ssfp_distance(inst, 0, 0, beta)      # validates beta early
    return TwoStageProblem(
        scenario_set=inst.scenarios,
        build_model=lambda sc, pr: build(inst, tuple(sc), tuple(pr)),
        distance=lambda i, j: ssfp_distance(inst, i, j, beta),
        decision_columns=first_stage_installs,
        name=inst.name)
