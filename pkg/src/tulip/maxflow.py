"""Shortest-augmenting-path max flow with both minimum cuts."""
from __future__ import annotations

from collections import deque


def max_flow(arcs, capacities, source, sink, num_vertices=None, tol=1e-12):
    """Max ``source``->``sink`` flow on a digraph.

    Returns ``(value, source_side, sink_side)``.  ``source_side`` is the set
    of vertices reachable from the source in the final residual graph;
    ``sink_side`` is the complement of the vertices that can still reach
    the sink (the "back cut").  Both sets contain the source and not the sink.
    """
    if source == sink:
        raise ValueError("source and sink must differ")
    if num_vertices is None:
        num_vertices = 1 + max([source, sink] + [max(u, v) for u, v in arcs])
    n = num_vertices
    # residual graph as adjacency of edge ids; edge e and e^1 are paired
    head, cap, adj = [], [], [[] for _ in range(n)]
    for (u, v), c in zip(arcs, capacities):
        if c < 0:
            raise ValueError("capacities must be non-negative")
        adj[u].append(len(head)); head.append(v); cap.append(float(c))
        adj[v].append(len(head)); head.append(u); cap.append(0.0)

    value = 0.0
    while True:
        parent = [-1] * n
        parent[source] = -2
        queue = deque([source])
        while queue and parent[sink] == -1:
            u = queue.popleft()
            for e in adj[u]:
                v = head[e]
                if parent[v] == -1 and cap[e] > tol:
                    parent[v] = e
                    queue.append(v)
        if parent[sink] == -1:
            break
        push = float("inf")
        v = sink
        while v != source:
            e = parent[v]
            push = min(push, cap[e])
            v = head[e ^ 1]
        v = sink
        while v != source:
            e = parent[v]
            cap[e] -= push
            cap[e ^ 1] += push
            v = head[e ^ 1]
        value += push

    reach = {source}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for e in adj[u]:
            v = head[e]
            if v not in reach and cap[e] > tol:
                reach.add(v)
                queue.append(v)
    # vertices with a residual path to the sink: walk reverse residual arcs
    to_sink = {sink}
    queue = deque([sink])
    while queue:
        v = queue.popleft()
        for e in adj[v]:
            u = head[e]
            # residual arc u->v is the partner of e (v->u)
            if u not in to_sink and cap[e ^ 1] > tol:
                to_sink.add(u)
                queue.append(u)
    back = set(range(n)) - to_sink
    return value, frozenset(reach), frozenset(back)


def cut_arcs(arcs, side):
    """Indices of arcs leaving ``side``."""
    return [i for i, (u, v) in enumerate(arcs) if u in side and v not in side]
