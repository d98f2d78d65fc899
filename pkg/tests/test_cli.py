import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from qlightning.actions import build_model
from qlightning.cli import SEED_ENV, main
from qlightning.lightning import verify
from qlightning.statevec import StateVector


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


def _strip(report):
    report = dict(report)
    report.pop("timestamp")
    return report


def test_mint_verify_round_trip(capsys, tmp_path):
    note = tmp_path / "note.json"
    code, rep = _run(capsys, ["mint", "--group", "2x5", "--seed", "4", "--out", str(note)])
    assert code == 0 and rep["command"] == "mint"
    code, ver = _run(capsys, ["verify", "--note", str(note), "--seed", "1"])
    assert code == 0
    d = json.loads(note.read_text())
    model = build_model(d["action"])
    want = verify(model, model.spec.element(d["serial"]), StateVector.from_json(d["state"])).accept_prob
    assert ver["metrics"]["accept_prob"] == pytest.approx(want, abs=1e-12)
    assert ver["metrics"]["accept_prob"] == pytest.approx(1.0, abs=1e-12)
    code, wrong = _run(capsys, ["verify", "--note", str(note), "--exact", "--serial", "1,0"])
    if wrong["metrics"]["serial"] != d["serial"]:
        assert wrong["metrics"]["accept_prob"] == pytest.approx(0.0, abs=1e-12)
    code, fh = _run(capsys, ["findh", "--note", str(note), "--seed", "2"])
    assert fh["metrics"]["matches_file_serial"] is True


def test_reports_identical_except_timestamp(capsys, tmp_path):
    argv = ["reduce", "d2x", "--group", "8", "--seed", "5", "--trials", "2"]
    _, a = _run(capsys, argv)
    _, b = _run(capsys, argv)
    assert set(a) == {"command", "config", "metrics", "version", "timestamp"}
    assert set(a["timestamp"]) == {"started_utc", "wall_clock_s"}
    assert json.dumps(_strip(a), sort_keys=True) == json.dumps(_strip(b), sort_keys=True)
    r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
    main(["rega", "mint", "--seed", "3", "--report", str(r1)])
    main(["rega", "mint", "--seed", "3", "--report", str(r2)])
    capsys.readouterr()
    assert _strip(json.loads(r1.read_text())) == _strip(json.loads(r2.read_text()))


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "5")
    _, env = _run(capsys, ["reduce", "twist", "--group", "6", "--trials", "2"])
    monkeypatch.delenv(SEED_ENV)
    _, flag = _run(capsys, ["reduce", "twist", "--group", "6", "--trials", "2", "--seed", "5"])
    assert _strip(env) == _strip(flag)
    assert env["config"]["seed"] == 5


def test_csv_header(capsys, tmp_path):
    out = tmp_path / "rows.csv"
    code, rep = _run(capsys, ["reduce", "ddh-pair", "--group", "7", "--seed", "1", "--trials", "3",
                              "--csv", str(out)])
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * rep["metrics"]["trials"]
    assert list(rows[0]) == sorted(rows[0])


def test_rega_round_trip(capsys, tmp_path):
    note = tmp_path / "rn.json"
    code, rep = _run(capsys, ["rega", "mint", "--seed", "8", "--out", str(note)])
    assert code == 0
    code, ver = _run(capsys, ["rega", "verify", "--note", str(note), "--seed", "9"])
    assert code == 0 and ver["metrics"]["accepted"] is True
    assert ver["metrics"]["accept_prob"] >= 0.999


def test_kgea_exact(capsys):
    code, rep = _run(capsys, ["attack", "kgea", "--group", "101", "--exact"])
    assert code == 0 and rep["metrics"]["uniform"] is True
    assert rep["metrics"]["samples"] == []
    assert np.allclose(rep["metrics"]["distribution"], 1 / 101, atol=1e-12)


def test_lattice_commands(capsys):
    code, rep = _run(capsys, ["lattice", "attack", "--seed", "1", "--trials", "5"])
    assert code == 0
    code, rep = _run(capsys, ["lattice", "flooding", "--sigmas", "4,8"])
    assert code == 0


@pytest.mark.parametrize("argv, code, kind", [
    (["bogus"], 2, "usage"),
    (["mint", "--group", "8"], 3, None),
    (["mint", "--group", "5000", "--action", "translation", "--seed", "1"], 5, None),
    (["verify", "--note", "/nonexistent/note.json"], 3, None),
])
def test_error_codes(capsys, monkeypatch, argv, code, kind):
    monkeypatch.delenv(SEED_ENV, raising=False)
    got, rep = _run(capsys, argv)
    assert got == code
    err = rep["error"]
    assert set(err) == {"code", "exit_code", "message", "type"}
    assert err["exit_code"] == code
    if kind:
        assert err["code"] == kind


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "qlightning", "selftest", "--only", "10"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout)["metrics"]["all_passed"] is True
