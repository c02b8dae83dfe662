"""Repair decoded graphs into rooted, connected, acyclic AMRs."""

from __future__ import annotations

from collections import deque
from typing import Collection, Optional, Tuple

from .candidates import FALLBACK_RELATION, NO_EDGE, RelationTables, relation_candidates
from .graph import AmrGraph, component_roots, find_cycle, reachable_from, weak_components


def _attachment_label(g: AmrGraph, root: str, target: str, tables: Optional[RelationTables]) -> str:
    if tables is None:
        return FALLBACK_RELATION
    cands = [r for r in relation_candidates(tables, g.label(root), g.label(target)) if r != NO_EDGE]
    return cands[0] if cands else FALLBACK_RELATION


def connect(g: AmrGraph, root: str, tables: Optional[RelationTables] = None) -> AmrGraph:
    """Hang every component that lacks ``root`` off ``root``.

    The edge goes to the component's first root (in-degree 0 node) and
    carries the most frequent non-NO-EDGE relation candidate for the pair,
    or ``mod`` when there is none.
    """
    if root not in g.labels:
        raise ValueError(f"root {root!r} is not in the graph")
    comps = weak_components(g)
    if len(comps) <= 1:
        return g.with_root(root) if g.root != root else g
    out = g.with_root(root)
    for comp, target in zip(comps, component_roots(g)):
        if root in comp:
            continue
        out = out.with_edge(root, _attachment_label(g, root, target, tables), target)
    return out


def _root_distances(g: AmrGraph) -> dict:
    """Undirected BFS distance of each node from the graph root."""
    if g.root is None:
        return {}
    dist = {g.root: 0}
    queue = deque([g.root])
    while queue:
        u = queue.popleft()
        for w in g.undirected[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def break_cycles(g: AmrGraph, tables: Optional[RelationTables] = None,
                 protected: Collection[Tuple[str, str]] = ()) -> AmrGraph:
    """Delete edges until the graph is acyclic.

    Two-node cycles lose the edge whose relation was rarer in training
    (later-inserted on ties).  Longer cycles lose the cycle edge entering the
    node farthest from the root (later-inserted on ties).  Edges between
    ``protected`` (source, target) pairs go only when a cycle has nothing else.
    """
    protected = set(protected)
    freq = tables.all_relations if tables is not None else {}
    while True:
        cycle = find_cycle(g)
        if cycle is None:
            return g
        on_cycle = []
        for k, u in enumerate(cycle):
            v = cycle[(k + 1) % len(cycle)]
            # parallel edges: the latest one stands for the hop
            idx = max(n for n, (s, _, t) in enumerate(g.edges) if s == u and t == v)
            on_cycle.append(idx)
        candidates = [i for i in on_cycle if (g.edges[i][0], g.edges[i][2]) not in protected] or on_cycle
        if len(cycle) == 2:
            victim = min(candidates, key=lambda i: (freq.get(g.edges[i][1], 0), -i))
        else:
            dist = _root_distances(g)
            far = float("inf")
            victim = max(candidates, key=lambda i: (dist.get(g.edges[i][2], far), i))
        g = g.without_edge(victim)


def ensure_rooted(g: AmrGraph, tables: Optional[RelationTables] = None) -> AmrGraph:
    """Attach nodes the root cannot reach, so depth-first writing covers all.

    Expects an acyclic graph whose root has no incoming edges; each unreached
    in-degree-0 node gets an edge from the root.
    """
    if not g.nodes:
        return g
    while True:
        reach = reachable_from(g, g.root)
        if len(reach) == len(g.nodes):
            return g
        orphans = [v for v in g.variables if v not in reach and not g.parents[v]]
        if not orphans:
            # cyclic leftover: fall back to the first unreached node
            orphans = [next(v for v in g.variables if v not in reach)]
        for v in orphans:
            g = g.with_edge(g.root, _attachment_label(g, g.root, v, tables), v)
