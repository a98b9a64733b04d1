import json
import subprocess
import sys

import pytest

from nfaslim.cli import main, parse_size
from nfaslim.core import State, make_nfa
from nfaslim.formats import config_record_size, emit_anml, parse_anml
from nfaslim.generator import GenConfig, file_sha256, generate

A, B = frozenset(b"a"), frozenset(b"b")


def test_parse_size():
    assert parse_size("1k") == 1024 and parse_size("300") == 300
    with pytest.raises(Exception):
        parse_size("0")


def test_generate_writes_corpus(tmp_path):
    out = tmp_path / "c"
    assert main(["generate", "--sizes", "1k,2k", "--count", "2", "--out", str(out)]) == 0
    files = sorted(p.name for p in out.glob("*.anml"))
    assert files == ["g1024_0.anml", "g1024_1.anml", "g2048_0.anml", "g2048_1.anml"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest) == 4 and all("error" not in m for m in manifest)
    again = tmp_path / "d"
    main(["generate", "--sizes", "1k,2k", "--count", "2", "--out", str(again)])
    assert all(file_sha256(out / f) == file_sha256(again / f) for f in files)


def test_generate_without_out_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--sizes", "1k"])
    assert exc.value.code == 2


@pytest.fixture()
def small_dir(tmp_path):
    d = tmp_path / "in"
    d.mkdir()
    for i in range(2):
        nfa = generate(GenConfig(n_nodes=120, avg_out_degree=5, max_fanout=12, seed=i))
        (d / f"s{i}.anml").write_text(emit_anml(nfa.renamed(f"s{i}")))
    return d


def test_prune_requires_theta(small_dir, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["prune", "--in", str(small_dir), "--out", str(tmp_path / "o")])
    assert exc.value.code == 2


def test_prune_oracle_then_verify_and_report(small_dir, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["prune", "--in", str(small_dir), "--out", str(out), "--theta", "0.35",
                 "--oracle-only", "--jobs", "1", "--no-timing"]) == 0
    assert (out / "s0.pruned.anml").exists() and (out / "summary.csv").exists()
    rep = tmp_path / "verify.json"
    code = main(["verify", "--original", str(small_dir), "--pruned", str(out), "--theta", "0.35",
                 "--max-len", "3", "--report", str(rep)])
    doc = json.loads(rep.read_text())
    assert code == 0 and len(doc["results"]) == 2
    assert all(r["inputs_checked"] == 1 + 4 + 16 + 64 for r in doc["results"])
    capsys.readouterr()
    assert main(["report", "--in", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("file,size,") and len(lines) == 3
    assert lines[1:] == (out / "summary.csv").read_text().splitlines()[1:]


def _pair(tmp_path, drop):
    states = [State("s0", A, True), State("s1", B, False, True)]
    orig = make_nfa("p", states, [("s0", "s1", 0.9)])
    pruned = make_nfa("p", states, [] if drop else [("s0", "s1", 0.9)])
    a, b = tmp_path / "a.anml", tmp_path / "b.anml"
    a.write_text(emit_anml(orig))
    b.write_text(emit_anml(pruned))
    return a, b


def test_verify_identical_pair(tmp_path, capsys):
    a, _ = _pair(tmp_path, drop=False)
    gen = generate(GenConfig(n_nodes=40, avg_out_degree=3, max_fanout=8, seed=9))
    g = tmp_path / "g.anml"
    g.write_text(emit_anml(gen))
    assert main(["verify", "--original", str(g), "--pruned", str(g), "--theta", "0.5"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["results"][0]["inputs_checked"] == 341


def test_verify_detects_violation(tmp_path, capsys):
    a, b = _pair(tmp_path, drop=True)
    assert main(["verify", "--original", str(a), "--pruned", str(b), "--theta", "0.5",
                 "--alphabet", "ab", "--max-len", "2"]) == 1
    doc = json.loads(capsys.readouterr().out)
    assert doc["results"][0]["completeness_violations"] >= 1


@pytest.fixture()
def g8(tmp_path):
    nfa = generate(GenConfig(n_nodes=300, avg_out_degree=4, max_fanout=8, seed=4))
    p = tmp_path / "g.anml"
    p.write_text(emit_anml(nfa))
    return p, nfa


def test_cost_sweep(g8, tmp_path):
    p, _ = g8
    out = tmp_path / "sweep.csv"
    assert main(["cost", "--in", str(p), "--fanout-sweep", "8,16,32,64", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "fanout,luts,registers,uram_blocks,min_latency,max_latency"
    assert len(lines) == 5


def test_cost_rejects_small_fanout(g8, tmp_path):
    p, nfa = g8
    assert main(["cost", "--in", str(p), "--fanout", "1", "--out", str(tmp_path / "x.csv")]) == 1


def test_export(g8, tmp_path):
    p, nfa = g8
    assert main(["export", "--in", str(p), "--max-fanout", "8"]) == 0
    data = p.with_suffix(".cfg").read_bytes()
    assert len(data) == nfa.n_states * (36 + 48) == nfa.n_states * config_record_size(8)
    assert main(["export", "--in", str(p), "--max-fanout",
                 str(nfa.max_out_degree() - 1)]) == 1


def test_export_bad_input(tmp_path):
    bad = tmp_path / "bad.anml"
    bad.write_text("<anml")
    assert main(["export", "--in", str(bad), "--max-fanout", "8"]) == 1


def test_config_env(small_dir, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"prune": {"theta": 0.35, "oracle_only": True, "jobs": 1}}))
    monkeypatch.setenv("NFASLIM_CONFIG", str(cfg))
    out = tmp_path / "o"
    assert main(["prune", "--in", str(small_dir), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["theta"] == 0.35 and summary["oracle_only"] is True
    cfg.write_text(json.dumps({"prune": {"bogus": 1}}))
    with pytest.raises(SystemExit) as exc:
        main(["prune", "--in", str(small_dir), "--out", str(out)])
    assert exc.value.code == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "nfaslim.cli", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "generate" in r.stdout
