import csv
import io
import json
import os
import shutil
import subprocess
import sys

import pytest

from flatlab.cli import main
from flatlab.families import build_h11, square_torus
from flatlab.surface import load_surface, periods, save_surface, validate


@pytest.fixture
def torus_file(tmp_path):
    p = tmp_path / "torus.json"
    save_surface(square_torus(), p)
    return str(p)


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_validate(capsys, torus_file):
    code, out, _ = run_cli(capsys, "validate", "--surface", torus_file)
    assert code == 0
    rep = json.loads(out)
    assert rep["ok"] and rep["stratum"] == [0]


def test_validate_bad_surface(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"polygons": [[[0, 0], [1, 0], [1, 1], [0, 1]]], "gluings": [[[0, 0], [0, 2]]]}))
    code, out, _ = run_cli(capsys, "validate", "--surface", p)
    assert code == 1 and not json.loads(out)["ok"]


def test_sc_csv(capsys, torus_file):
    code, out, _ = run_cli(capsys, "sc", "--surface", torus_file, "--max-len", 1)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["start_class", "prong", "hol_x", "hol_y", "length"]
    assert len(rows) - 1 == 4


def test_missing_required_flag(capsys, torus_file):
    with pytest.raises(SystemExit) as exc:
        main(["sc", "--surface", torus_file])
    assert exc.value.code == 2


def test_malformed_json_reports_position(capsys, tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text('{"kind": "nondivergence",\n "T": 10.0,, "eta": 0.1}\n')
    code, _, err = run_cli(capsys, "experiment", "run", p)
    assert code == 2
    assert "line 2" in err and "column" in err


def test_unknown_config_key(capsys, tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"kind": "nondivergence", "Tmax": 3}))
    code, _, err = run_cli(capsys, "experiment", "run", p)
    assert code == 1 and "Tmax" in err


def test_linmodel_jacobian(capsys):
    code, out, _ = run_cli(capsys, "linmodel", "--check", "jacobian", "--d", 4, "--n", 100, "--seed", 1)
    assert code == 0 and json.loads(out)["pass"] is True


def test_linmodel_rejects_bad_dimension(capsys):
    code, _, _ = run_cli(capsys, "linmodel", "--check", "jacobian", "--d", 1)
    assert code == 2


def test_build_round_trip(capsys, tmp_path):
    cases = [
        ("h11", {"a": 0.6, "b": 0.1, "tau1": 0.3, "tau2": 0.8}),
        ("torus", {"u": [1.0, 0.0], "v": [0.3, 1.0]}),
        ("octagon", {}),
        ("h2", {"a": 0.3, "x": 1.0, "tau": 0.5, "lattice": [[1.4, 0.0], [0.2, 0.5]]}),
        ("two_tori", {"x": 0.05, "lattice1": [[0.7, 0.0], [0.1, 0.714285714285714]],
                      "lattice2": [[0.5, 0.2], [0.0, 1.0]]}),
    ]
    for fam, params in cases:
        pf = tmp_path / f"{fam}.params.json"
        pf.write_text(json.dumps(params))
        out = tmp_path / f"{fam}.json"
        code, _, err = run_cli(capsys, "build", "--family", fam, "--params", pf, "--out", out)
        assert code == 0, err
        code, rep, _ = run_cli(capsys, "validate", "--surface", out)
        assert code == 0 and json.loads(rep)["ok"]


def test_sample_then_build(capsys, tmp_path):
    csvf = tmp_path / "p.csv"
    code, _, err = run_cli(capsys, "sample", "--family", "h2", "--a", 0.3, "--n", 3, "--seed", 5, "--out", csvf)
    assert code == 0 and "resolved config" in err
    for row in range(3):
        out = tmp_path / f"s{row}.json"
        code, _, _ = run_cli(capsys, "build", "--family", "h2", "--params", csvf, "--row", row, "--out", out)
        assert code == 0
        assert validate(load_surface(out)).stratum == (2,)
    code, _, _ = run_cli(capsys, "build", "--family", "h2", "--params", csvf, "--row", 7)
    assert code == 2


def test_sample_is_seeded(capsys, monkeypatch):
    _, a, _ = run_cli(capsys, "sample", "--family", "h11", "--n", 2, "--seed", 3)
    monkeypatch.setenv("FLATLAB_SEED", "3")
    _, b, _ = run_cli(capsys, "sample", "--family", "h11", "--n", 2)
    assert a == b
    monkeypatch.setenv("FLATLAB_SEED", "x")
    code, _, _ = run_cli(capsys, "sample", "--family", "h11")
    assert code == 2


def test_cylinders(capsys, tmp_path, torus_file):
    code, out, _ = run_cli(capsys, "cylinders", "--surface", torus_file)
    assert code == 0
    d = json.loads(out)
    assert d["periodic"] and d["cylinders"][0]["circumference"] == pytest.approx(1)
    code, out, _ = run_cli(capsys, "cylinders", "--surface", torus_file, "--direction", 1.5707963267948966)
    assert code == 0 and len(json.loads(out)["cylinders"]) == 1


def test_flow(capsys, tmp_path):
    src = tmp_path / "h.json"
    save_surface(build_h11(0.6, 0.1, 0.3, 0.8), src)
    out = tmp_path / "u.json"
    code, _, _ = run_cli(capsys, "flow", "--surface", src, "--op", "horocycle", "--s", 0.5, "--out", out)
    assert code == 0
    P, Q = periods(load_surface(src)), periods(load_surface(out))
    assert Q.x == pytest.approx(P.x + 0.5 * P.y)
    code, _, _ = run_cli(capsys, "flow", "--surface", src, "--op", "geodesic")
    assert code == 2


def test_surgery_full_twist(capsys, tmp_path, torus_file):
    spec = tmp_path / "spec.json"
    out = tmp_path / "twisted.json"
    spec.write_text(json.dumps({"surface": torus_file, "mode": "shear", "s": 1.0,
                                "cylinders": [[0, 1.0]], "out": str(out)}))
    code, _, err = run_cli(capsys, "surgery", "--spec", spec)
    assert code == 0, err
    assert validate(load_surface(out)).ok
    spec.write_text(json.dumps({"surface": torus_file, "mode": "shear", "s": 1.0, "cylinders": [[3, 1.0]]}))
    code, _, _ = run_cli(capsys, "surgery", "--spec", spec)
    assert code == 2


def test_experiment_run(capsys, tmp_path):
    cfg = tmp_path / "leaf.json"
    cfg.write_text(json.dumps({"kind": "leaf_equivalence", "walks": 2, "steps": 3}))
    out = tmp_path / "out"
    code, _, err = run_cli(capsys, "experiment", "run", cfg, "--out", out, "--seed", 4, "--threads", 1)
    assert code == 0, err
    rep = json.loads((out / "report.json").read_text())
    assert rep["config"]["seed"] == 4 and rep["passed"]


@pytest.mark.skipif(shutil.which("flatlab") is None, reason="console script not installed")
def test_console_script(torus_file):
    res = subprocess.run(["flatlab", "sc", "--surface", torus_file, "--max-len", "1"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and len(res.stdout.strip().splitlines()) == 5


def test_build_inline_params(capsys, tmp_path):
    out = tmp_path / "q.json"
    code, _, err = run_cli(capsys, "build", "--family", "h11", "--params", '{"a": 0.6, "b": 0.2}', "--out", out)
    assert code == 0 and "(1, 1)" in err
    assert validate(load_surface(out)).stratum == (1, 1)
