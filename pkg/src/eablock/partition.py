"""Construction and validation of block partitions.

The builder runs four stages: find block vertices and short cycles, grow a
unicyclic block around every short cycle, grow a tree block around every
remaining heavy vertex, and make every leftover vertex its own block. Each
stage has a structural precondition; when one fails the builder returns a
``Failure`` with a witness that ``recheck_failure`` can confirm independently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import structure
from .influence import WeightParams, aggregate_influence, block_vertices, is_block_vertex, log_weights_for
from .instance import Graph, Instance
from .kernels import graph as _gk

KINDS = ("singleton", "tree", "unicyclic")


@dataclass(frozen=True)
class Block:
    kind: str
    members: tuple[int, ...]
    boundary: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.members)


@dataclass(eq=False)
class BlockPartition:
    n: int
    blocks: list[Block]
    vertex_to_block: np.ndarray
    radii_used: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_blocks(cls, graph: Graph, groups, kinds=None, radii_used: dict | None = None) -> "BlockPartition":
        groups = [tuple(sorted(int(v) for v in g)) for g in groups]
        owner = np.full(graph.n, -1, dtype=np.int64)
        for i, g in enumerate(groups):
            if not g:
                raise ValueError("empty block")
            if np.any(owner[list(g)] >= 0):
                raise ValueError(f"block {i} overlaps an earlier block")
            owner[list(g)] = i
        if np.any(owner < 0):
            raise ValueError(f"vertices not covered: {np.flatnonzero(owner < 0)[:10].tolist()}")
        blocks = []
        for i, g in enumerate(groups):
            kind = structure.classify(graph, g) if kinds is None else kinds[i]
            if kind not in KINDS:
                raise ValueError(f"unknown block kind {kind!r}")
            blocks.append(Block(kind, g, tuple(structure.outer_boundary(graph, g))))
        owner.setflags(write=False)
        return cls(graph.n, blocks, owner, dict(radii_used or {}))

    @classmethod
    def singletons(cls, graph: Graph) -> "BlockPartition":
        return cls.from_blocks(graph, [[v] for v in range(graph.n)])

    def __len__(self) -> int:
        return len(self.blocks)

    def block_of(self, v: int) -> int:
        return int(self.vertex_to_block[v])

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "radii_used": self.radii_used,
            "blocks": [
                {"kind": b.kind, "members": list(b.members), "boundary": list(b.boundary)} for b in self.blocks
            ],
        }

    @classmethod
    def from_json(cls, graph: Graph, data: dict) -> "BlockPartition":
        if data.get("n") != graph.n:
            raise ValueError(f"partition is for n={data.get('n')}, graph has n={graph.n}")
        part = cls.from_blocks(
            graph,
            [b["members"] for b in data["blocks"]],
            kinds=[b["kind"] for b in data["blocks"]],
            radii_used=data.get("radii_used"),
        )
        for b, raw in zip(part.blocks, data["blocks"]):
            if "boundary" in raw and list(b.boundary) != sorted(raw["boundary"]):
                raise ValueError(f"stored boundary disagrees with graph for block {list(b.members)[:5]}")
        return part


def save_partition(partition: BlockPartition, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(partition.to_json(), indent=1) + "\n", encoding="utf-8")
    return path


def load_partition(graph: Graph, path) -> BlockPartition:
    return BlockPartition.from_json(graph, json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class Failure:
    """Why a build stopped. ``condition`` is 1, 2 or 3, or ``overlap`` / ``structure``."""

    condition: int | str
    witness: dict
    message: str

    def to_json(self) -> dict:
        return {"condition": self.condition, "witness": self.witness, "message": self.message}


def find_short_cycles(graph: Graph, params: WeightParams) -> list[list[int]]:
    flat, offsets = _gk.short_cycles(graph.indptr, graph.nbrs, params.short_cycle_max_len)
    return [flat[offsets[i] : offsets[i + 1]].tolist() for i in range(len(offsets) - 1)]


def graph_diameter(graph: Graph) -> int:
    """Largest finite distance between two vertices (max over components)."""
    labels, count = _gk.connected_components(graph.indptr, graph.nbrs)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(count + 1))
    best = 0
    for c in range(count):
        members = order[bounds[c] : bounds[c + 1]]
        if members.size > best + 1:
            best = max(best, int(_gk.component_diameter(graph.indptr, graph.nbrs, members)))
    return best


def _path_to_source(parent: np.ndarray, w: int) -> list[int]:
    out = [int(w)]
    while parent[out[-1]] >= 0:
        out.append(int(parent[out[-1]]))
    return out[::-1]


def _far_reach(graph: Graph, sources: np.ndarray, passable: np.ndarray, radius: int):
    """Vertices reachable from ``sources`` through ``passable`` ones, and the first one at distance >= radius."""
    order, parent = _gk.bfs_through(graph.indptr, graph.nbrs, sources, passable)
    near = _gk.bfs_distances(graph.indptr, graph.nbrs, sources, radius - 1)
    far = order[near[order] < 0]
    if far.size:
        return order, _path_to_source(parent, int(far[0]))
    return order, None


def build_partition(instance: Instance, params: WeightParams) -> BlockPartition | Failure:
    g = instance.graph
    n = g.n
    logw = log_weights_for(instance, params)
    is_block = block_vertices(instance, params, logw)
    non_block = ~is_block
    agg = aggregate_influence(instance).aggregate

    flat, offsets = _gk.short_cycles(g.indptr, g.nbrs, params.short_cycle_max_len)
    cycles = [flat[offsets[i] : offsets[i + 1]] for i in range(len(offsets) - 1)]

    i, j, dist = _gk.close_cycle_pair(g.indptr, g.nbrs, flat, offsets, params.cycle_separation)
    if i >= 0:
        return Failure(
            1,
            {"cycles": [cycles[i].tolist(), cycles[j].tolist()], "distance": int(dist)},
            f"two short cycles at distance {dist} < {params.cycle_separation}",
        )

    owner = np.full(n, -1, dtype=np.int64)
    groups: list[list[int]] = []
    kinds: list[str] = []

    cycle_sets = []
    for c in cycles:
        ball = _gk.bfs_distances(g.indptr, g.nbrs, c, params.cycle_buffer_radius)
        core = np.flatnonzero(ball >= 0)
        reached, path = _far_reach(g, core, non_block, params.cycle_reach)
        if path is not None:
            return Failure(
                2,
                {"cycle": c.tolist(), "path": path},
                f"vertex {path[-1]} is reachable through non-block vertices at distance >= {params.cycle_reach}",
            )
        cycle_sets.append(np.union1d(core, reached))

    for c, members in zip(cycles, cycle_sets):
        clash = members[owner[members] >= 0]
        if clash.size:
            v = int(clash[0])
            other = groups[owner[v]]
            return Failure(
                "overlap",
                {"vertex": v, "cycles": [[int(x) for x in cycles[owner[v]]], c.tolist()], "first_block": other[:20]},
                f"vertex {v} falls in two cycle blocks",
            )
        owner[members] = len(groups)
        groups.append(members.tolist())
        kinds.append("unicyclic")

    heavy = np.flatnonzero((agg > params.heavy_threshold) & (owner < 0))
    reach_sets = {}
    for u in heavy.tolist():
        reached, path = _far_reach(g, np.array([u]), non_block, params.tree_reach)
        if path is not None:
            return Failure(
                3,
                {"vertex": u, "path": path},
                f"vertex {path[-1]} is reachable from heavy vertex {u} at distance >= {params.tree_reach}",
            )
        reach_sets[u] = reached
    for u in heavy.tolist():
        if owner[u] >= 0:
            continue
        members = reach_sets[u]
        members = members[owner[members] < 0]
        owner[members] = len(groups)
        groups.append(sorted(members.tolist()))
        kinds.append("tree")

    for v in np.flatnonzero(owner < 0).tolist():
        owner[v] = len(groups)
        groups.append([v])
        kinds.append("singleton")

    radii = params.as_dict()
    try:
        part = BlockPartition.from_blocks(g, groups, kinds=kinds, radii_used=radii)
    except ValueError as exc:
        return Failure("structure", {"error": str(exc)}, str(exc))
    report = validate_partition(instance, part, params, block_mask=is_block)
    if not report.passed:
        name, problems = next((k, v) for k, v in report.checks.items() if v)
        idx = problems[0].get("block")
        witness = {"check": name, "problems": problems[:5]}
        if idx is not None:
            witness["block"] = {"kind": part.blocks[idx].kind, "members": list(part.blocks[idx].members)}
        return Failure("structure", witness, f"built blocks fail check {name}")
    return part


@dataclass
class ValidationReport:
    passed: bool
    checks: dict[str, list]

    def failed(self) -> list[str]:
        return [k for k, v in self.checks.items() if v]


def validate_partition(
    instance: Instance, partition: BlockPartition, params: WeightParams, block_mask: np.ndarray | None = None
) -> ValidationReport:
    """Re-check every structural requirement of a block partition from scratch."""
    g = instance.graph
    if block_mask is None:
        block_mask = block_vertices(instance, params)
    checks: dict[str, list] = {
        "cover": [],
        "shape": [],
        "boundary_block_vertex": [],
        "boundary_single_neighbour": [],
        "cycle_length": [],
        "cycle_buffer": [],
        "singleton_block_vertex": [],
        "cycle_separation": [],
    }
    seen = np.zeros(g.n, dtype=np.int64)
    for b in partition.blocks:
        seen[list(b.members)] += 1
    if np.any(seen != 1):
        checks["cover"].append({"vertices": np.flatnonzero(seen != 1)[:20].tolist()})
    for idx in range(len(partition.blocks)):
        if np.any(partition.vertex_to_block[list(partition.blocks[idx].members)] != idx):
            checks["cover"].append({"block": idx, "reason": "vertex_to_block mismatch"})

    for idx, b in enumerate(partition.blocks):
        for name, problems in _block_problems(g, b.members, b.kind, block_mask, params).items():
            for p in problems:
                checks[name].append({"block": idx, **p})

    flat, offsets = _gk.short_cycles(g.indptr, g.nbrs, params.short_cycle_max_len)
    i, j, dist = _gk.close_cycle_pair(g.indptr, g.nbrs, flat, offsets, params.cycle_separation)
    if i >= 0:
        checks["cycle_separation"].append(
            {"cycles": [flat[offsets[i] : offsets[i + 1]].tolist(), flat[offsets[j] : offsets[j + 1]].tolist()], "distance": int(dist)}
        )
    return ValidationReport(not any(checks.values()), checks)


def _block_problems(g: Graph, members, kind: str, block_mask: np.ndarray, params: WeightParams) -> dict[str, list]:
    out: dict[str, list] = {}
    k = len(members)
    e = len(structure.induced_edge_ids(g, members))
    connected = len(structure.local_components(g, members)) == 1
    expected = {"singleton": 0, "tree": k - 1, "unicyclic": k}[kind]
    if e != expected or not connected or (kind == "singleton" and k != 1):
        out.setdefault("shape", []).append({"kind": kind, "size": k, "edges": e, "connected": connected})
    if kind == "singleton":
        if not block_mask[members[0]]:
            out.setdefault("singleton_block_vertex", []).append({"vertex": int(members[0])})
        return out
    boundary = structure.outer_boundary(g, members)
    inside = set(int(v) for v in members)
    for x in boundary:
        if not block_mask[x]:
            out.setdefault("boundary_block_vertex", []).append({"vertex": x})
        cnt = sum(1 for w in g.neighbors(x).tolist() if w in inside)
        if cnt != 1:
            out.setdefault("boundary_single_neighbour", []).append({"vertex": x, "neighbours_inside": cnt})
    if kind == "unicyclic" and e == k and connected:
        cyc = structure.cycle_vertices(g, members)
        if len(cyc) > params.short_cycle_max_len:
            out.setdefault("cycle_length", []).append({"length": len(cyc)})
        if boundary:
            dist = _gk.bfs_distances(g.indptr, g.nbrs, np.asarray(cyc), params.cycle_buffer_radius - 1)
            close = [x for x in boundary if dist[x] >= 0]
            if close:
                out.setdefault("cycle_buffer", []).append({"vertex": close[0], "distance": int(dist[close[0]])})
    return out


def _is_cycle(g: Graph, cyc) -> bool:
    cyc = [int(v) for v in cyc]
    if len(cyc) < 3 or len(set(cyc)) != len(cyc):
        return False
    return all(int(b) in set(g.neighbors(a).tolist()) for a, b in zip(cyc, cyc[1:] + cyc[:1]))


def _is_path(g: Graph, path) -> bool:
    path = [int(v) for v in path]
    if len(set(path)) != len(path):
        return False
    return all(int(b) in set(g.neighbors(a).tolist()) for a, b in zip(path, path[1:]))


def recheck_failure(instance: Instance, params: WeightParams, failure: Failure) -> bool:
    """Confirm a build failure's witness without reusing the builder's intermediate state."""
    g = instance.graph
    w = failure.witness
    if failure.condition == 1:
        a, b = w["cycles"]
        if not (_is_cycle(g, a) and _is_cycle(g, b)):
            return False
        if max(len(a), len(b)) > params.short_cycle_max_len or _same_cycle(list(a), list(b)):
            return False
        dist = _gk.bfs_distances(g.indptr, g.nbrs, np.asarray(a), g.n)
        d = min(int(dist[v]) for v in b if dist[v] >= 0) if any(dist[v] >= 0 for v in b) else g.n
        return d < params.cycle_separation
    if failure.condition in (2, 3):
        path = w["path"]
        if not _is_path(g, path) or len(path) < 2:
            return False
        logw = log_weights_for(instance, params)
        if any(is_block_vertex(instance, v, params, logw)[0] for v in path[1:]):
            return False
        if failure.condition == 2:
            cyc = w["cycle"]
            if not _is_cycle(g, cyc) or len(cyc) > params.short_cycle_max_len:
                return False
            ball = _gk.bfs_distances(g.indptr, g.nbrs, np.asarray(cyc), params.cycle_buffer_radius)
            if ball[path[0]] < 0:
                return False
            core = np.flatnonzero(ball >= 0)
            dist = _gk.bfs_distances(g.indptr, g.nbrs, core, g.n)
            return dist[path[-1]] >= params.cycle_reach
        u = w["vertex"]
        agg = aggregate_influence(instance).aggregate
        if path[0] != u or not agg[u] > params.heavy_threshold:
            return False
        dist = _gk.bfs_distances(g.indptr, g.nbrs, np.array([u]), g.n)
        return dist[path[-1]] >= params.tree_reach
    if failure.condition == "overlap":
        a, b = w["cycles"]
        v = w["vertex"]
        logw = log_weights_for(instance, params)
        mask = block_vertices(instance, params, logw)
        for cyc in (a, b):
            if not _is_cycle(g, cyc):
                return False
            ball = _gk.bfs_distances(g.indptr, g.nbrs, np.asarray(cyc), params.cycle_buffer_radius)
            core = np.flatnonzero(ball >= 0)
            order, _ = _gk.bfs_through(g.indptr, g.nbrs, core, ~mask)
            if v not in set(order.tolist()):
                return False
        return True
    if failure.condition == "structure":
        if "block" not in w:
            return False
        mask = block_vertices(instance, params)
        blk = w["block"]
        return w["check"] in _block_problems(g, sorted(blk["members"]), blk["kind"], mask, params)
    return False


def _same_cycle(a, b) -> bool:
    n = len(a)
    for s in range(n):
        rot = a[s:] + a[:s]
        if rot == list(b) or rot[::-1] == list(b):
            return True
    return False
