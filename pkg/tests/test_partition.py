import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eablock import structure
from eablock.influence import WeightParams, aggregate_influence, block_vertices
from eablock.instance import Graph, Instance, gen_graph
from eablock.partition import (
    BlockPartition,
    Failure,
    build_partition,
    find_short_cycles,
    graph_diameter,
    load_partition,
    recheck_failure,
    save_partition,
    validate_partition,
)


def coupling_for(gamma, beta=1.0):
    return 2 * math.atanh(gamma) / beta


def small_params(n, **over):
    base = dict(block_range=2, short_cycle_max_len=4, cycle_buffer_radius=1, cycle_separation=3, tree_reach=3, cycle_reach=3)
    base.update(over)
    return WeightParams.defaults(n, 1.2, 0.4, **base)


def star_with_arms():
    """Centre 0 with two arms 0-1-2-3 and 0-4-5-6; only the centre is heavy."""
    g = Graph.from_edges(7, [(0, 1), (1, 2), (2, 3), (0, 4), (4, 5), (5, 6)])
    J = np.array([coupling_for(0.425), coupling_for(0.1), coupling_for(0.1)] * 2)
    return Instance(g, J, 1.0)


def triangle_with_tails():
    edges = [(0, 1), (1, 2), (0, 2), (0, 3), (3, 4), (4, 5), (1, 6), (6, 7), (7, 8)]
    g = Graph.from_edges(9, edges)
    return Instance(g, np.full(len(edges), coupling_for(0.2)), 1.0)


def test_short_cycles_examples():
    p = small_params(10, short_cycle_max_len=3)
    tree = Graph.from_edges(5, [(0, 1), (1, 2), (1, 3), (3, 4)])
    assert find_short_cycles(tree, p) == []
    tri = Graph.from_edges(3, [(2, 1), (0, 2), (1, 0)])
    assert find_short_cycles(tri, p) == [[0, 1, 2]]
    two = Graph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    assert sorted(find_short_cycles(two, p)) == [[0, 1, 2], [3, 4, 5]]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), max_len=st.integers(3, 6))
def test_short_cycles_match_networkx(seed, max_len):
    g = gen_graph(14, 3.5, seed=seed)
    p = small_params(14, short_cycle_max_len=max_len)
    got = find_short_cycles(g, p)
    G = nx.Graph(g.edges.tolist())
    want = [c for c in nx.simple_cycles(G, length_bound=max_len) if len(c) >= 3]
    assert len(got) == len(want)
    assert {frozenset(c) for c in got} == {frozenset(c) for c in want}
    for c in got:
        assert c[0] == min(c) and c[1] < c[-1]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_diameter_matches_networkx(seed):
    g = gen_graph(25, 2.0, seed=seed)
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_edges_from(g.edges.tolist())
    want = max(nx.diameter(G.subgraph(c)) for c in nx.connected_components(G))
    assert graph_diameter(g) == want


def test_all_light_forest_gives_singletons():
    g = Graph.from_edges(6, [(0, 1), (1, 2), (3, 4)])
    inst = Instance(g, np.full(3, 0.1), 1.0)
    p = small_params(6)
    part = build_partition(inst, p)
    assert isinstance(part, BlockPartition)
    assert [b.kind for b in part.blocks] == ["singleton"] * 6
    assert validate_partition(inst, part, p).passed


def test_heavy_vertex_with_block_neighbours_is_own_tree_block():
    inst = star_with_arms()
    p = small_params(7)
    agg = aggregate_influence(inst).aggregate
    assert agg[0] > p.heavy_threshold and np.all(agg[1:] <= p.heavy_threshold)
    mask = block_vertices(inst, p)
    assert not mask[0] and mask[1:].all()
    part = build_partition(inst, p)
    assert isinstance(part, BlockPartition)
    assert part.blocks[0].kind == "tree" and part.blocks[0].members == (0,)
    assert part.blocks[0].boundary == (1, 4)
    assert all(b.kind == "singleton" for b in part.blocks[1:])
    rep = validate_partition(inst, part, p)
    assert rep.passed, rep.failed()


def test_unicyclic_block_built_and_validated():
    inst = triangle_with_tails()
    p = small_params(9)
    part = build_partition(inst, p)
    assert isinstance(part, BlockPartition)
    cyc = part.blocks[0]
    assert cyc.kind == "unicyclic"
    assert set(cyc.members) == {0, 1, 2, 3, 6}
    assert set(cyc.boundary) == {4, 7}
    assert validate_partition(inst, part, p).passed


def test_two_close_triangles_fail_condition_one():
    edges = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (4, 6)]
    inst = Instance(Graph.from_edges(7, edges), np.full(len(edges), 0.1), 1.0)
    p = small_params(7, cycle_separation=3)
    fail = build_partition(inst, p)
    assert isinstance(fail, Failure) and fail.condition == 1
    assert sorted(map(sorted, fail.witness["cycles"])) == [[0, 1, 2], [4, 5, 6]]
    assert recheck_failure(inst, p, fail)
    # with separation 2 the pair passes condition 1 but the buffer balls share vertex 3
    loose = small_params(7, cycle_separation=2)
    overlap = build_partition(inst, loose)
    assert overlap.condition == "overlap" and overlap.witness["vertex"] == 3
    assert recheck_failure(inst, loose, overlap)


def test_long_heavy_chain_fails_condition_three():
    k = 8
    g = Graph.from_edges(k, [(i, i + 1) for i in range(k - 1)])
    inst = Instance(g, np.full(k - 1, coupling_for(0.6)), 1.0)
    p = small_params(k)
    fail = build_partition(inst, p)
    assert isinstance(fail, Failure) and fail.condition == 3
    assert recheck_failure(inst, p, fail)
    assert len(fail.witness["path"]) - 1 >= p.tree_reach


def test_recheck_rejects_tampered_witness():
    k = 8
    g = Graph.from_edges(k, [(i, i + 1) for i in range(k - 1)])
    inst = Instance(g, np.full(k - 1, coupling_for(0.6)), 1.0)
    p = small_params(k)
    fail = build_partition(inst, p)
    bad = Failure(fail.condition, {**fail.witness, "path": fail.witness["path"][:2]}, "")
    assert not recheck_failure(inst, p, bad)


def test_validator_flags_non_block_singleton():
    inst = star_with_arms()
    p = small_params(7)
    part = BlockPartition.singletons(inst.graph)
    rep = validate_partition(inst, part, p)
    assert rep.failed() == ["singleton_block_vertex"]
    assert rep.checks["singleton_block_vertex"][0]["vertex"] == 0


def test_validator_flags_extra_edge_in_tree_block():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
    inst = Instance(g, np.full(4, 0.1), 1.0)
    part = BlockPartition.from_blocks(g, [[0, 1, 2], [3]], kinds=["tree", "singleton"])
    rep = validate_partition(inst, part, small_params(4))
    assert "shape" in rep.failed()


def test_partition_json_roundtrip(tmp_path):
    inst = triangle_with_tails()
    part = build_partition(inst, small_params(9))
    back = load_partition(inst.graph, save_partition(part, tmp_path / "p.json"))
    assert [b.members for b in back.blocks] == [b.members for b in part.blocks]
    assert [b.kind for b in back.blocks] == [b.kind for b in part.blocks]
    assert back.radii_used == part.radii_used
    with pytest.raises(ValueError):
        load_partition(Graph.from_edges(3, []), tmp_path / "p.json")


def test_from_blocks_rejects_overlap_and_gaps():
    g = Graph.from_edges(3, [(0, 1)])
    with pytest.raises(ValueError):
        BlockPartition.from_blocks(g, [[0, 1], [1, 2]])
    with pytest.raises(ValueError):
        BlockPartition.from_blocks(g, [[0, 1]])


def containment_radius_ok(inst, part, p):
    """Tree blocks stay within tree_reach of their heavy seed; cycle blocks within cycle_reach of the buffer ball."""
    g = inst.graph
    G = nx.Graph()
    G.add_nodes_from(range(g.n))
    G.add_edges_from(g.edges.tolist())
    agg = aggregate_influence(inst).aggregate
    for b in part.blocks:
        if b.kind == "tree":
            # the seed is the lowest-id heavy member since seeds are processed in id order
            seed = min(v for v in b.members if agg[v] > p.heavy_threshold)
            dist = nx.single_source_shortest_path_length(G, seed)
            radius = p.tree_reach
        elif b.kind == "unicyclic":
            cyc = structure.cycle_vertices(g, b.members)
            ball = nx.multi_source_dijkstra_path_length(G, set(cyc), cutoff=p.cycle_buffer_radius)
            dist = nx.multi_source_dijkstra_path_length(G, set(ball))
            radius = p.cycle_reach
        else:
            continue
        if max(dist[v] for v in b.members) >= radius:
            return False
    return True


def random_build_case(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 40))
    g = gen_graph(n, float(rng.uniform(1.0, 3.0)), seed=seed)
    inst = Instance(g, rng.standard_normal(g.m), float(rng.uniform(0.1, 2.0)))
    p = small_params(n, block_range=int(rng.integers(1, 4)), cycle_buffer_radius=int(rng.integers(1, 3)))
    return inst, p


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 1_000_000))
def test_builds_are_deterministic_and_validate(seed):
    inst, p = random_build_case(seed)
    first = build_partition(inst, p)
    second = build_partition(inst, p)
    if isinstance(first, Failure):
        assert isinstance(second, Failure) and second.to_json() == first.to_json()
        assert recheck_failure(inst, p, first)
        return
    assert [b.members for b in first.blocks] == [b.members for b in second.blocks]
    assert validate_partition(inst, first, p).passed
    assert containment_radius_ok(inst, first, p)


def test_random_builds_mostly_succeed():
    # keeps the property test above from passing on failures alone
    outcomes = [build_partition(*random_build_case(s)) for s in range(200)]
    built = [o for o in outcomes if isinstance(o, BlockPartition)]
    assert len(built) >= 50
    assert any(b.kind != "singleton" for o in built for b in o.blocks)
