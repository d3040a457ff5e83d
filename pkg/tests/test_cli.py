from __future__ import annotations

import json
from importlib import resources

import jsonschema
import pytest

from latentdag.cli import main
from latentdag.graphs import canonical_key, format_graph, induced_subgraph, make_dag

from conftest import DIAMOND_TAIL, NEC_FAIL


@pytest.fixture
def schema():
    return json.loads(resources.files("latentdag").joinpath("schemas/analyze.schema.json").read_text())


def graph_file(tmp_path, name, m, edges):
    p = tmp_path / name
    p.write_text(format_graph(make_dag(m, edges)))
    return str(p)


def test_analyze_diamond_tail(tmp_path, capsys, schema):
    path = graph_file(tmp_path, "diamond_tail.txt", *DIAMOND_TAIL)
    assert main(["analyze", path]) == 0
    out = capsys.readouterr().out
    assert "suff=true" in out and "verdict=IdentifiableCertified" in out
    assert "complement: 1-4 1-5 2-3 2-5 3-5" in out
    assert main(["analyze", path, "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    jsonschema.validate(report, schema)
    assert report["sufficient"] is True
    assert report["jacobian"]["status"] == "IdentifiableCertified"


def test_analyze_nec_fail(tmp_path, capsys, schema):
    path = graph_file(tmp_path, "nec_fail.txt", *NEC_FAIL)
    assert main(["analyze", path, "--json"]) == 3
    report = json.loads(capsys.readouterr().out)
    jsonschema.validate(report, schema)
    nec = report["necessary"]
    assert nec["holds"] is False and nec["e_con"] == 10 and nec["d_con"] == 2


def test_analyze_cycle_is_input_error(tmp_path, capsys):
    p = tmp_path / "cyc.txt"
    p.write_text("3\n1 2\n2 3\n3 1\n")
    assert main(["analyze", str(p)]) == 2
    assert "CycleDetected" in capsys.readouterr().err


@pytest.mark.parametrize("text,needle", [("3\n1 x\n", "line 2"), ("", "ParseError")])
def test_analyze_parse_errors(tmp_path, capsys, text, needle):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    assert main(["analyze", str(p)]) == 2
    assert needle in capsys.readouterr().err


def test_analyze_missing_file_and_bad_excluded(tmp_path, capsys):
    assert main(["analyze", str(tmp_path / "nope.txt")]) == 2
    path = graph_file(tmp_path, "g.txt", 3, [])
    assert main(["analyze", path, "--excluded", "a,b"]) == 2
    assert main(["analyze", path, "--excluded", "7"]) == 2
    assert main(["analyze", path, "--bound", "1"]) == 2


def test_analyze_dumps(tmp_path, capsys):
    path = graph_file(tmp_path, "diamond_tail.txt", *DIAMOND_TAIL)
    jac, wit = tmp_path / "j.txt", tmp_path / "w.json"
    assert main(["analyze", path, "--dump-jacobian", str(jac), "--dump-witness", str(wit)]) == 0
    first = jac.read_text()
    assert first.splitlines()[1] == "15 15"
    assert json.loads(wit.read_text())["kind"] == "concentration"
    assert main(["analyze", path, "--dump-jacobian", str(jac)]) == 0
    assert jac.read_text() == first


def test_analyze_excluded(tmp_path, capsys, schema):
    path = graph_file(tmp_path, "g.txt", 3, [(1, 2)])
    assert main(["analyze", path, "--json"]) == 3
    assert json.loads(capsys.readouterr().out)["jacobian"]["status"] == "EdgeBoundViolated"
    main(["analyze", path, "--excluded", "3", "--json"])
    report = json.loads(capsys.readouterr().out)
    jsonschema.validate(report, schema)
    assert report["excluded"] == [3] and report["jacobian"]["columns"] == 6


def test_enumerate(tmp_path, capsys):
    assert main(["enumerate", "4", "--output-dir", str(tmp_path), "--workers", "1"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("total=6 identifiable=5 suff=5 wermuth=5 nec_violated=1")
    assert (tmp_path / "graphs_m4.csv").exists() and (tmp_path / "cache_m4.json").exists()
    assert main(["enumerate", "5", "--output-dir", str(tmp_path), "--workers", "1",
                 "--cache-lower", str(tmp_path / "cache_m4.json")]) == 0
    assert capsys.readouterr().out.startswith("total=115 identifiable=95 suff=88 wermuth=49 nec_violated=20")
    assert main(["enumerate", "7"]) == 2
    assert main(["enumerate", "2"]) == 2
    assert main(["enumerate", "5", "--cache-lower", str(tmp_path / "absent.json")]) == 2


def test_equiv(tmp_path, capsys):
    a = graph_file(tmp_path, "a.txt", 3, [(1, 2), (2, 3)])
    b = graph_file(tmp_path, "b.txt", 3, [(3, 2), (2, 1)])
    c = graph_file(tmp_path, "c.txt", 3, [(1, 2), (3, 2)])
    assert main(["equiv", a, b]) == 0
    assert json.loads(capsys.readouterr().out)["markov_equivalent"] is True
    main(["equiv", a, c])
    assert json.loads(capsys.readouterr().out)["markov_equivalent"] is False
    d = graph_file(tmp_path, "d.txt", 4, [])
    assert main(["equiv", a, d]) == 2


def test_spearman(tmp_path, capsys):
    p = tmp_path / "i4.txt"
    p.write_text("4 4\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n")
    assert main(["spearman", str(p)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["is_spearman"] is False and out["is_cospearman"] is False
    p.write_text("3 3\n3 -1 -1\n-1 3 -1\n-1 -1 3\n")
    main(["spearman", str(p)])
    out = json.loads(capsys.readouterr().out)
    assert out["is_cospearman"] is True and out["cospearman"]["diag_part"] == ["4", "4", "4"]
    p.write_text("2 2\n1 2\n")
    assert main(["spearman", str(p)]) == 2


def test_extend(tmp_path, capsys):
    G = make_dag(*DIAMOND_TAIL)
    path = graph_file(tmp_path, "diamond_tail.txt", *DIAMOND_TAIL)
    cache = tmp_path / "cache.json"
    key = canonical_key(induced_subgraph(G, [1, 2, 3, 4])).hex()
    cache.write_text(json.dumps({key: {"status": "IdentifiableCertified", "provenance": "jacobian"}}))
    assert main(["extend", path, str(cache)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["certificate"]["chain"] == [{"node": 5, "role": "sink"}]
    cache.write_text(json.dumps({key: {"status": "IdentifiableCertified", "provenance": "probable"}}))
    assert main(["extend", path, str(cache), "--cache-only"]) == 3
    assert main(["extend", path, str(tmp_path / "none.json")]) == 2
