import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eablock.instance import (
    Graph,
    Instance,
    InstanceFormatError,
    InstanceStructureError,
    beta_critical,
    gen_couplings,
    gen_graph,
    gen_instance,
    load_instance,
    save_instance,
    validate_couplings,
)


def test_graph_rejects_bad_edges():
    with pytest.raises(InstanceStructureError):
        Graph.from_edges(3, [(0, 0)])
    with pytest.raises(InstanceStructureError):
        Graph.from_edges(3, [(0, 1), (1, 0)])
    with pytest.raises(InstanceStructureError):
        Graph.from_edges(3, [(0, 3)])


def test_adjacency_sorted_and_symmetric():
    g = gen_graph(200, 6.0, seed=3)
    seen = set()
    for v in range(g.n):
        nb = g.neighbors(v)
        assert np.all(np.diff(nb) > 0)
        for w, e in zip(nb.tolist(), g.incident_edges(v).tolist()):
            assert sorted((v, w)) == g.edges[e].tolist()
            seen.add(e)
    assert seen == set(range(g.m))


def test_tiny_graphs():
    assert gen_graph(1, 4.0, seed=0).m == 0
    assert gen_graph(2, 4.0, seed=9).edges.tolist() == [[0, 1]]


def test_generation_is_deterministic():
    a = gen_instance(300, 5.0, 0.3, seed=11)
    b = gen_instance(300, 5.0, 0.3, seed=11)
    assert a == b
    assert gen_instance(300, 5.0, 0.3, seed=12) != a
    c = gen_instance(300, 5.0, 0.3, seed=11, coupling_seed=4)
    assert c.graph == a.graph and not np.array_equal(c.couplings, a.couplings)


def test_edge_count_matches_binomial_mean():
    counts = np.array([gen_graph(100, 5.0, seed=s).m for s in range(1000)])
    p = 0.05
    mean = 4950 * p
    se = math.sqrt(4950 * p * (1 - p) / counts.size)
    assert abs(counts.mean() - mean) < 3 * se


def test_mean_degree():
    n, d = 400, 7.0
    degs = np.concatenate([gen_graph(n, d, seed=s).degrees() for s in range(100)])
    target = d * (n - 1) / n
    se = degs.std() / math.sqrt(degs.size)
    assert abs(degs.mean() - target) < 3 * se


def test_coupling_moments():
    g = Graph.from_edges(2, [(0, 1)])
    assert gen_couplings(Graph.from_edges(3, []), seed=1).size == 0
    big = gen_graph(20_000, 100.0, seed=1)
    J = gen_couplings(big, seed=2)
    assert J.size > 900_000
    assert abs(J.mean()) < 3e-3
    assert abs(J.var() - 1) < 1e-2
    absJ = np.abs(J)
    assert abs(absJ.mean() - math.sqrt(2 / math.pi)) < 3 * absJ.std() / math.sqrt(J.size)
    # sign balance
    frac = np.mean(J > 0)
    assert abs(frac - 0.5) < 3 * 0.5 / math.sqrt(J.size)
    assert g.m == 1


def test_validate_couplings():
    g = Graph.from_edges(100, [(i, i + 1) for i in range(99)])
    assert validate_couplings(Instance(g, np.ones(99), 1.0)).passed
    J = np.ones(99)
    J[7] = 0.0
    rep = validate_couplings(Instance(g, J, 1.0))
    assert not rep.passed and rep.violations[0][0] == 7
    J = np.ones(99)
    J[3] = -25.0
    rep = validate_couplings(Instance(g, J, 1.0))
    assert not rep.passed and rep.violations[0][0] == 3
    assert rep.upper == pytest.approx(10 * math.sqrt(math.log(100)))


def test_beta_critical():
    assert beta_critical(10.0) == pytest.approx(math.sqrt(2 * math.pi) / 10)


def test_roundtrip_empty(tmp_path):
    inst = Instance(Graph.from_edges(4, []), np.zeros(0), 0.7)
    assert load_instance(save_instance(inst, tmp_path / "e.ea")) == inst


def test_roundtrip_random_bit_exact(tmp_path):
    inst = gen_instance(50, 4.0, 0.123456789, seed=5)
    back = load_instance(save_instance(inst, tmp_path / "r.ea", manifest="r.ea.manifest.json"))
    assert back == inst
    assert back.couplings.tobytes() == inst.couplings.tobytes()
    assert "# manifest r.ea.manifest.json" in (tmp_path / "r.ea").read_text()


def test_load_errors_name_the_line(tmp_path):
    p = tmp_path / "bad.ea"
    p.write_text("# ea-instance 1\n3 0x1.0p+0\n0 1 zz\n")
    with pytest.raises(InstanceFormatError, match=r"bad.ea:3: field J"):
        load_instance(p)
    p.write_text("# ea-instance 1\n3 one\n")
    with pytest.raises(InstanceFormatError, match=r":2: field beta"):
        load_instance(p)


def test_edge_count_mismatch_is_structural(tmp_path):
    p = tmp_path / "m.ea"
    p.write_text("# ea-instance 1\n# edges 2\n3 0x1.0p+0\n0 1 0x1.0p+0\n")
    with pytest.raises(InstanceStructureError):
        load_instance(p)
    p.write_text("# ea-instance 1\n3 0x1.0p+0\n0 1\n")
    with pytest.raises(InstanceStructureError):
        load_instance(p)


@settings(max_examples=40, deadline=None)
@given(
    n=st.integers(1, 12),
    beta=st.floats(0.0, 10.0, allow_nan=False),
    data=st.data(),
)
def test_roundtrip_property(tmp_path_factory, n, beta, data):
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = data.draw(st.lists(st.sampled_from(pairs), unique=True) if pairs else st.just([]))
    J = data.draw(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=len(chosen), max_size=len(chosen)))
    inst = Instance(Graph.from_edges(n, chosen), np.array(J, dtype=float), beta)
    path = tmp_path_factory.mktemp("rt") / "x.ea"
    assert load_instance(save_instance(inst, path)) == inst
