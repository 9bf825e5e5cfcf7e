import json
import subprocess
import sys

import numpy as np
import pytest

from eablock import cli
from eablock.instance import Graph, Instance, load_instance, save_instance
from eablock.partition import load_partition


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path))
    return tmp_path


def manifest_of(path):
    return json.loads(path.with_name(path.name + ".manifest.json").read_text())


def test_gen_writes_instance_and_manifest(tmp_path, capsys):
    out = tmp_path / "inst.ea"
    assert cli.main(["gen", "--n", "1000", "--d", "16", "--beta-frac", "0.8", "--seed", "7", "-o", str(out)]) == 0
    inst = load_instance(out)
    assert inst.n == 1000
    assert inst.beta == pytest.approx(0.8 * np.sqrt(2 * np.pi) / 16)
    m = manifest_of(out)
    assert m["command"] == "gen" and m["seeds"] == {"graph": 7, "couplings": 7}
    assert m["parameters"]["d"] == 16.0 and m["outputs"] == [str(out)]
    assert "wall_clock_seconds" in m and m["version"]
    assert f"# manifest {out.name}.manifest.json" in out.read_text()
    # the manifest is also printed
    assert json.loads(capsys.readouterr().out)["command"] == "gen"


def test_gen_is_reproducible(tmp_path):
    a, b = tmp_path / "a.ea", tmp_path / "b.ea"
    for p in (a, b):
        cli.main(["gen", "--n", "200", "--d", "5", "--beta", "0.3", "--seed", "3", "-o", str(p)])
    strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith("# manifest")]
    assert strip(a) == strip(b)


def test_output_dir_from_environment(outdir):
    assert cli.main(["gen", "--n", "50", "--d", "3", "--beta", "0.5", "--seed", "1"]) == 0
    files = sorted(p.name for p in outdir.iterdir())
    assert files == ["instance-n50-d3-s1.ea", "instance-n50-d3-s1.ea.manifest.json"]


def test_usage_errors_exit_two(tmp_path, capsys):
    assert cli.main(["gen", "--n", "10", "--d", "3", "--seed", "1", "--bogus"]) == 2
    assert cli.main(["gen", "--n", "10", "--d", "3", "--seed", "1", "--beta", "1", "--beta-frac", "1"]) == 2
    assert cli.main(["nosuch"]) == 2
    assert cli.main(["gen", "--n", "10", "--d", "3", "--seed", "1", "--beta", "-1", "-o", str(tmp_path / "x.ea")]) == 2
    assert "refused" in capsys.readouterr().err
    assert cli.main(["analyze", str(tmp_path / "missing.ea")]) == 2


def two_triangles(path):
    edges = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (5, 6), (4, 6)]
    inst = Instance(Graph.from_edges(7, edges), np.full(len(edges), 0.1), 1.0)
    return save_instance(inst, path)


def test_partition_with_nearby_triangles_fails_condition_one(tmp_path):
    path = two_triangles(tmp_path / "tri.ea")
    out = tmp_path / "tri.partition.json"
    assert cli.main(["partition", str(path), "--epsilon", "0.4", "-o", str(out)]) == 1
    report = json.loads((tmp_path / "tri.partition.json.failure.json").read_text())
    assert report["condition"] == 1
    assert sorted(map(sorted, report["witness"]["cycles"])) == [[0, 1, 2], [4, 5, 6]]
    m = manifest_of(out)
    assert m["report"]["built"] is False
    assert "cycle_separation" in m["parameters"]


def test_partition_success_and_run_block_dynamics(tmp_path):
    inst = Instance(Graph.from_edges(6, [(0, 1), (1, 2), (3, 4)]), np.full(3, 0.1), 1.0)
    path = save_instance(inst, tmp_path / "forest.ea")
    part = tmp_path / "forest.partition.json"
    assert cli.main(["partition", str(path), "--d", "1.2", "--cap-diameter", "-o", str(part)]) == 0
    assert len(load_partition(inst.graph, part)) == 6
    trace = tmp_path / "trace.csv"
    args = ["run", str(path), "--dynamics", "block", "--partition", str(part), "--steps", "30", "--stride", "3",
            "--seed", "4", "-o", str(trace)]
    assert cli.main(args) == 0
    lines = trace.read_text().splitlines()
    assert lines[0] == "# manifest trace.csv.manifest.json"
    assert lines[1] == "step,updated_unit,energy,magnetization"
    assert len(lines) == 12
    first = trace.read_text()
    assert cli.main(args) == 0
    assert trace.read_text() == first


def test_block_run_without_partition_is_refused(tmp_path):
    path = two_triangles(tmp_path / "tri.ea")
    assert cli.main(["run", str(path), "--dynamics", "block", "--steps", "5", "--seed", "1"]) == 2


def test_analyze_reports_radii(tmp_path):
    path = two_triangles(tmp_path / "tri.ea")
    out = tmp_path / "a.csv"
    code = cli.main(["analyze", str(path), "--d", "2.3", "--block-range", "2", "-o", str(out)])
    assert code in (0, 1)
    m = manifest_of(out)
    assert m["parameters"]["block_range"] == 2 and m["parameters"]["d"] == 2.3
    assert out.read_text().splitlines()[1] == "vertex,degree,aggregate,log_weight,block_vertex"


def test_spectral_and_refusal(tmp_path):
    path = two_triangles(tmp_path / "tri.ea")
    part = tmp_path / "p.json"
    part.write_text(json.dumps({"n": 7, "blocks": [{"members": [0, 1, 2], "kind": "unicyclic"},
                                                    {"members": [3, 4, 5, 6], "kind": "unicyclic"}]}))
    out = tmp_path / "s.csv"
    code = cli.main(["spectral", str(path), "--partition", str(part), "--comparison", "-o", str(out)])
    m = manifest_of(out)
    assert code == (0 if m["report"]["comparison"]["holds"] else 1)
    assert m["report"]["glauber"]["tau_rel"] > 1
    cli.main(["gen", "--n", "20", "--d", "3", "--beta", "0.5", "--seed", "1", "-o", str(tmp_path / "big.ea")])
    assert cli.main(["spectral", str(tmp_path / "big.ea"), "-o", str(tmp_path / "x.csv")]) == 2


def test_couple_contraction_falls_back_to_singletons(tmp_path):
    path = two_triangles(tmp_path / "tri.ea")
    out = tmp_path / "c.csv"
    assert cli.main(["couple", str(path), "--experiment", "contraction", "--trials", "200", "--seed", "2",
                     "-o", str(out)]) == 0
    m = manifest_of(out)
    assert m["report"]["partition"].startswith("singletons")
    assert len(out.read_text().splitlines()) == 202


def test_couple_coalescence(tmp_path):
    path = two_triangles(tmp_path / "tri.ea")
    out = tmp_path / "co.csv"
    assert cli.main(["couple", str(path), "--experiment", "coalescence", "--runs", "3", "--seed", "2",
                     "-o", str(out)]) == 0
    assert manifest_of(out)["report"]["fraction"] == 1.0


def test_bounds_subcommand(tmp_path):
    out = tmp_path / "b.csv"
    assert cli.main(["bounds", "--which", "half-normal", "phi", "--N", "10", "--delta", "0.5", "--trials", "20000",
                     "-o", str(out)]) == 0
    m = manifest_of(out)
    assert m["report"]["phi"]["passed"] and len(m["report"]["tail_checks"]) == 1
    assert cli.main(["bounds", "--which", "aggregate", "--agg-d", "50", "100", "--agg-epsilon", "0.5"]) == 2


def test_verify_quick_subset(tmp_path, capsys):
    out = tmp_path / "acc.csv"
    assert cli.main(["verify", "--quick", "--only", "6,7", "-o", str(out)]) == 0
    assert capsys.readouterr().out.count("[PASS]") == 2
    assert [r["number"] for r in manifest_of(out)["report"]["results"]] == [6, 7]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "eablock", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for name in ("gen", "analyze", "partition", "run", "couple", "spectral", "bounds", "verify"):
        assert name in res.stdout
