"""Random small structures for the exactness and spectral checks."""

from __future__ import annotations

import numpy as np

from . import structure
from .instance import Graph, Instance, beta_critical, gen_instance
from .partition import BlockPartition


def random_tree_edges(k: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """Uniform labelled tree on ``0..k-1`` via a Pruefer sequence."""
    if k <= 1:
        return []
    if k == 2:
        return [(0, 1)]
    seq = rng.integers(0, k, size=k - 2).tolist()
    degree = [1] * k
    for x in seq:
        degree[x] += 1
    edges = []
    for x in seq:
        leaf = min(i for i in range(k) if degree[i] == 1)
        edges.append((min(leaf, x), max(leaf, x)))
        degree[leaf] -= 1
        degree[x] -= 1
    u, v = [i for i in range(k) if degree[i] == 1]
    edges.append((u, v))
    return edges


def random_unicyclic_edges(k: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    """A random tree plus one extra edge, so the result has exactly one cycle (needs ``k >= 3``)."""
    if k < 3:
        raise ValueError("a unicyclic graph needs at least 3 vertices")
    edges = random_tree_edges(k, rng)
    present = set(edges)
    missing = [(u, v) for u in range(k) for v in range(u + 1, k) if (u, v) not in present]
    edges.append(missing[int(rng.integers(len(missing)))])
    return edges


def random_couplings(m: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(m)


def random_spins(n: int, rng: np.random.Generator) -> np.ndarray:
    return np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)


def random_block_instance(k: int, kind: str, boundary_size: int, beta: float, rng: np.random.Generator):
    """Block on vertices ``0..k-1`` plus ``boundary_size`` outside vertices, each wired to 1 or 2 block vertices.

    Returns ``(instance, members, boundary)`` with ``boundary`` a full configuration.
    """
    if kind == "tree":
        edges = random_tree_edges(k, rng)
    elif kind == "unicyclic":
        edges = random_unicyclic_edges(k, rng)
    else:
        raise ValueError(f"unknown block kind {kind!r}")
    edges = list(edges)
    for j in range(boundary_size):
        w = k + j
        hits = rng.choice(k, size=min(k, int(rng.integers(1, 3))), replace=False)
        edges.extend((int(h), w) for h in hits)
    n = k + boundary_size
    g = Graph.from_edges(n, edges)
    inst = Instance(g, random_couplings(g.m, rng), beta)
    return inst, list(range(k)), random_spins(n, rng)


def random_graph_edges(n: int, p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    return [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]


def random_small_instance(n: int, p: float, beta: float, rng: np.random.Generator) -> Instance:
    g = Graph.from_edges(n, random_graph_edges(n, p, rng))
    return Instance(g, random_couplings(g.m, rng), beta)


def random_valid_partition(graph: Graph, n_blocks: int, rng: np.random.Generator, tries: int = 50):
    """Random partition into ``n_blocks`` connected blocks, each a singleton, tree or unicyclic.

    Blocks grow from random seeds by absorbing unassigned neighbours while their
    cycle rank stays at most one. Returns ``None`` if no attempt covers the graph.
    """
    n = graph.n
    if not 1 <= n_blocks <= n:
        return None
    nbrs = [set(graph.neighbors(v).tolist()) for v in range(n)]
    for _ in range(tries):
        label = np.full(n, -1, dtype=np.int64)
        seeds = rng.permutation(n)[:n_blocks]
        label[seeds] = np.arange(n_blocks)
        rank = [0] * n_blocks
        while True:
            moves = []
            for v in np.flatnonzero(label < 0).tolist():
                for b in {int(label[w]) for w in nbrs[v] if label[w] >= 0}:
                    t = sum(1 for w in nbrs[v] if label[w] == b)
                    if rank[b] + t - 1 <= 1:
                        moves.append((v, b, t))
            if not moves:
                break
            v, b, t = moves[int(rng.integers(len(moves)))]
            label[v] = b
            rank[b] += t - 1
        if np.all(label >= 0):
            groups = [np.flatnonzero(label == b).tolist() for b in range(n_blocks)]
            return BlockPartition.from_blocks(graph, groups)
    return None


def random_instance_with_partition(n: int, p: float, beta: float, n_blocks: int, rng: np.random.Generator):
    """Resample the instance until a valid ``n_blocks`` partition is found."""
    while True:
        inst = random_small_instance(n, p, beta, rng)
        part = random_valid_partition(inst.graph, n_blocks, rng)
        if part is not None:
            return inst, part


def induced_tree_sample(instance: Instance, size: int, rng: np.random.Generator, tries: int = 200):
    """Grow a random connected vertex set whose induced subgraph is a tree, up to ``size`` vertices.

    Growth adds a random outer-boundary vertex whose addition keeps the induced
    graph acyclic. Returns the member list, or ``None`` if the seed vertex is isolated.
    """
    g = instance.graph
    for _ in range(tries):
        start = int(rng.integers(g.n))
        if g.degrees()[start] == 0:
            continue
        members = {start}
        while len(members) < size:
            cand = []
            for w in structure.outer_boundary(g, sorted(members)):
                touching = sum(1 for x in g.neighbors(w).tolist() if x in members)
                if touching == 1:
                    cand.append(w)
            if not cand:
                break
            members.add(int(cand[int(rng.integers(len(cand)))]))
        if len(members) > 1:
            return sorted(members)
    return None


def star_instance(R: int, couplings, beta: float, outer_per_leaf: int = 0, rng: np.random.Generator | None = None):
    """Star with center 0 and leaves ``1..R``; optionally each leaf gets outside neighbours.

    Returns ``(instance, members)``; any outside vertices follow the leaves.
    """
    edges = [(0, i) for i in range(1, R + 1)]
    J = list(np.broadcast_to(np.asarray(couplings, dtype=float), (R,)))
    nxt = R + 1
    for leaf in range(1, R + 1):
        for _ in range(outer_per_leaf):
            edges.append((leaf, nxt))
            J.append(float(rng.standard_normal()) if rng is not None else 1.0)
            nxt += 1
    g = Graph.from_edges(nxt, edges)
    return Instance(g, np.array(J, dtype=float), beta), list(range(R + 1))


def host_instance(n: int, d: float, epsilon: float, seed: int) -> Instance:
    """Sparse random instance at ``beta = (1 - epsilon) * beta_c(d)``."""
    return gen_instance(n, d, (1.0 - epsilon) * beta_critical(d), seed)
