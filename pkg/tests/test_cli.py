"""CLI round trips, determinism, exit codes."""

import json

import pytest

from acklab.cli import main
from acklab.core import dump_json, game_to_dict, structure_to_dict, validate_structure
from acklab.corpus import coordination_game, corpus_emit

from conftest import random_structure


@pytest.fixture
def files(tmp_path, rng):
    a = random_structure(rng, n_states=2, n_types=(2, 2), mu=(0.5, 0.5))
    b = random_structure(rng, n_states=2, n_types=(2, 2), mu=(0.5, 0.5))
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    dump_json(structure_to_dict(a), pa)
    dump_json(structure_to_dict(b), pb)
    game = coordination_game()
    # lift to the 2-state world of the structures
    from acklab.core import make_game
    g2 = make_game([list(x) for x in game.actions], ["s0", "s1"],
                   lambda i, ap, th: game.u(i, ap, 0), bound=float(game.bound))
    pg = tmp_path / "g.json"
    dump_json(game_to_dict(g2), pg)
    return tmp_path, str(pa), str(pb), str(pg)


def test_validate_roundtrip(files, capsys):
    _, pa, _, _ = files
    assert main(["validate", pa]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["result"] == "valid"
    # the emitted structure re-validates
    validate_structure(out["structure"])


def test_validate_bad_file_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"states": ["s"], "mu": [1.0], "types": [["t"], ["t"]],
                               "mass": [{"state": "s", "profile": ["t", "t"],
                                         "p": 0.5}]}))
    assert main(["validate", str(bad)]) == 1


def test_quotient_and_hierarchy(files, capsys):
    _, pa, _, _ = files
    assert main(["quotient", pa]) == 0
    out = json.loads(capsys.readouterr().out)
    assert "map" in out and "structure" in out
    assert main(["hierarchy", pa, "--hdepth", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["hierarchies"]


def test_ack_weak_dfg_intervals(files, capsys):
    _, pa, pb, _ = files
    for cmd in ("ack", "weak", "dfg"):
        assert main([cmd, pa, pb, "--tol", "0.01"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert 0 <= out["lower"] <= out["upper"]


def test_bibce_icr_bne_design(files, capsys):
    _, pa, _, pg = files
    assert main(["bibce", pa, "--game", pg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["sigma"]["rows"]
    assert main(["icr", pa, "--game", pg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["survivors"]
    assert main(["bne", pa, "--game", pg]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["count"] >= 1


def test_dstar_and_dvalue(files, capsys):
    _, pa, pb, pg = files
    assert main(["dstar", pa, pb, "--game", pg, "--directions", "4",
                 "--tol", "0.05"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["lower"] <= out["upper"]
    assert main(["dvalue", pa, pb, "--game", pg, "--directions", "4",
                 "--tol", "0.05"]) == 0


def test_bp_cp_infect(files, capsys):
    _, pa, _, _ = files
    assert main(["bp", pa, "--event", "0,1", "--p", "0.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out["indices"]) <= {0, 1}
    assert main(["cp", pa, "--event", "0,1,2", "--p", "0.3"]) == 0
    json.loads(capsys.readouterr().out)
    assert main(["infect", pa, "--event", "0", "--eps", "0.2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["chain"]


def test_quantize_and_make_email(files, tmp_path, capsys):
    _, pa, _, _ = files
    assert main(["quantize", pa, "--delta", "0.2"]) == 0
    out = json.loads(capsys.readouterr().out)
    validate_structure(out["structure"])
    assert main(["make", "email", "--n", "3", "--q", "0.8"]) == 0
    out = json.loads(capsys.readouterr().out)
    validate_structure(out["chain"])
    validate_structure(out["companion"])


def test_sweep_email_csv(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "email", "--n-range", "1..2", "--tol", "0.01",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    assert any("n_range=1..2" in h for h in header)
    rows = [ln for ln in lines if not ln.startswith("#")]
    assert rows[0].startswith("n,q,ack_lower")
    assert len(rows) == 3


def test_deterministic_bytes(files, tmp_path):
    _, pa, pb, _ = files
    o1, o2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert main(["ack", pa, pb, "--tol", "0.01", "--out", str(o1)]) == 0
    assert main(["ack", pa, pb, "--tol", "0.01", "--out", str(o2)]) == 0
    assert o1.read_bytes() == o2.read_bytes()


def test_corpus_entries_revalidate(capsys):
    for name in ("hellman-structure", "email-3", "email-3-ck", "complete-info"):
        payload = corpus_emit(name)
        validate_structure(payload, exact=name == "hellman-structure")
    assert main(["corpus", "emit", "matching-pennies"]) == 0
    out = json.loads(capsys.readouterr().out)
    from acklab.core import load_game
    load_game(out)


def test_corpus_unknown_entry():
    assert main(["corpus", "emit", "nope"]) == 1


def test_rational_mode_env(tmp_path, capsys, monkeypatch):
    # rational mode demands exactly-normalized inputs; corpus entries qualify
    path = tmp_path / "hellman.json"
    dump_json(corpus_emit("hellman-structure"), path)
    monkeypatch.setenv("ACKLAB_MODE", "rational")
    assert main(["validate", str(path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["result"] == "valid"
    assert all("." in row["p"] or "/" in row["p"]
               for row in out["structure"]["mass"])
