"""Small helpers about vertex subsets: induced edges, boundaries, the cycle of a unicyclic set."""

from __future__ import annotations

import numpy as np

from .instance import Graph


def member_mask(n: int, members) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    mask[np.asarray(list(members), dtype=np.int64)] = True
    return mask


def _member_set(members) -> set[int]:
    return {int(v) for v in members}


def induced_edge_ids(graph: Graph, members) -> np.ndarray:
    inside = _member_set(members)
    out = set()
    for v in inside:
        for w, e in zip(graph.neighbors(v).tolist(), graph.incident_edges(v).tolist()):
            if w in inside:
                out.add(e)
    return np.array(sorted(out), dtype=np.int64)


def outer_boundary(graph: Graph, members) -> list[int]:
    """Vertices outside ``members`` with at least one neighbour inside, sorted."""
    inside = _member_set(members)
    out = set()
    for v in inside:
        for w in graph.neighbors(v).tolist():
            if w not in inside:
                out.add(w)
    return sorted(out)


def local_components(graph: Graph, members) -> list[list[int]]:
    mask = _member_set(members)
    seen = set()
    comps = []
    for s in sorted(int(v) for v in members):
        if s in seen:
            continue
        comp = [s]
        seen.add(s)
        i = 0
        while i < len(comp):
            for w in graph.neighbors(comp[i]).tolist():
                if w in mask and w not in seen:
                    seen.add(w)
                    comp.append(w)
            i += 1
        comps.append(sorted(comp))
    return comps


def cycle_rank(graph: Graph, members) -> int:
    """Number of independent cycles of the induced subgraph."""
    k = len(set(int(v) for v in members))
    return len(induced_edge_ids(graph, members)) - k + len(local_components(graph, members))


def classify(graph: Graph, members) -> str:
    """``singleton``, ``tree`` or ``unicyclic`` for a connected set; ``ValueError`` otherwise."""
    members = sorted(set(int(v) for v in members))
    if len(members) == 1:
        return "singleton"
    if len(local_components(graph, members)) != 1:
        raise ValueError(f"block {members[:8]}... is not connected")
    rank = cycle_rank(graph, members)
    if rank == 0:
        return "tree"
    if rank == 1:
        return "unicyclic"
    raise ValueError(f"block {members[:8]}... has {rank} independent cycles")


def cycle_vertices(graph: Graph, members) -> list[int]:
    """Vertices on the cycles of the induced subgraph, found by repeatedly stripping leaves."""
    inside = _member_set(members)
    deg = {v: sum(1 for w in graph.neighbors(v).tolist() if w in inside) for v in inside}
    stack = [v for v, dv in deg.items() if dv <= 1]
    alive = dict.fromkeys(deg, True)
    while stack:
        v = stack.pop()
        if not alive[v]:
            continue
        alive[v] = False
        for w in graph.neighbors(v).tolist():
            if w in inside and alive[w]:
                deg[w] -= 1
                if deg[w] == 1:
                    stack.append(w)
    return sorted(v for v, a in alive.items() if a)
