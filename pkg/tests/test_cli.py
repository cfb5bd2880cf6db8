from __future__ import annotations

import json
import math

import numpy as np
import pytest

from rdl.cli import EXIT_NONCONVERGED, EXIT_OK, EXIT_USAGE, main
from rdl.gromov import AdmissibleExtension, FinitePointedSpace


def _write_space(path, pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    sp = FinitePointedSpace(d)
    path.write_text(json.dumps(sp.to_json_dict()))
    return sp


def test_simulate_halfplane_csv_and_manifest(tmp_path):
    out = tmp_path / "paths.csv"
    rc = main(["simulate", "--space", "halfplane", "--t-max", "1", "--dt", "0.01",
               "--paths", "7", "--seed", "1", "--record-stride", "20",
               "--out", str(out)])
    assert rc == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "path_id,t,x,y"
    assert sum(1 for ln in lines[1:] if ln.startswith("0,")) == sum(
        1 for ln in lines[1:] if ln.startswith("6,")
    )
    manifest = json.loads((tmp_path / "paths.csv.manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert "paths.csv" in manifest["outputs"]


def test_simulate_deterministic_bytes(tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--profile", "kaimanovich", "--t-max", "2", "--dt", "0.001",
            "--paths", "5", "--seed", "9", "--record-stride", "100"]
    assert main(args + ["--out", str(a)]) == EXIT_OK
    monkeypatch.setenv("RDL_THREADS", "8")  # thread cap must not affect bytes
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    ma = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    mb = json.loads((tmp_path / "b.csv.manifest.json").read_text())
    assert ma["outputs"]["a.csv"] == mb["outputs"]["b.csv"]


def test_simulate_usage_errors(tmp_path):
    out = str(tmp_path / "x.csv")
    assert main(["simulate", "--t-max", "1", "--out", out]) == EXIT_USAGE
    assert main(["simulate", "--space", "sol", "--t-max", "1", "--out", out]) == EXIT_USAGE
    assert main(["simulate", "--profile", "nope", "--t-max", "1", "--out", out]) == EXIT_USAGE


def test_report_h2(tmp_path, capsys):
    out = tmp_path / "rep.json"
    rc = main(["report", "--space", "h2", "--kappa", "1",
               "--t-grid", "5,10,20,30,39,40", "--out", str(out)])
    assert rc == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["schema"] == "v1"
    assert abs(rep["ell"] - 0.5) < 5e-3
    assert abs(rep["entropy_h"] - 0.5) < 2e-2
    assert abs(rep["volume_v"] - 1.0) < 1e-2
    assert all(e["pass"] for e in rep["inequalities"])
    table = capsys.readouterr().out
    assert "pass" in table


def test_report_euclidean_passes(tmp_path):
    rc = main(["report", "--space", "euclidean", "--dim", "2",
               "--t-grid", "500,1000,2400,2500"])
    assert rc == EXIT_OK


def test_report_nonconverged_exit_code():
    # a too-short horizon fails the increment Cauchy test on H^2
    rc = main(["report", "--space", "h2", "--t-grid", "0.5,1,1.5,2"])
    assert rc == EXIT_NONCONVERGED


def test_report_ensemble_mixture(tmp_path, capsys):
    mix = tmp_path / "mix.json"
    mix.write_text(json.dumps({
        "components": [{"weight": 0.5, "drift": 1.0}, {"weight": 0.5, "drift": 2.0}]
    }))
    out = tmp_path / "rep.json"
    rc = main(["report", "--ensemble-file", str(mix), "--out", str(out)])
    assert rc == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["ell"] == pytest.approx(1.5)
    assert rep["ell_plus"] == pytest.approx(2.0)


def test_report_usage(tmp_path):
    assert main(["report"]) == EXIT_USAGE
    assert main(["report", "--space", "h2", "--ensemble-file", "x.json"]) == EXIT_USAGE
    assert main(["report", "--space", "nope"]) == EXIT_USAGE


def test_gromov_cli(tmp_path, capsys):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    _write_space(a, [[0.0]])
    _write_space(b, [[0.0], [1.0]])
    rc = main(["gromov", "--a", str(a), "--b", str(b), "--tol", "1e-3"])
    assert rc == EXIT_OK
    outp = capsys.readouterr().out
    assert "0.5" in outp


def test_gromov_cli_witness_roundtrip(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    sa = _write_space(a, [[0.0], [0.5]])
    sb = _write_space(b, [[0.0], [0.6]])
    w = tmp_path / "w.json"
    rc = main(["gromov", "--a", str(a), "--b", str(b), "--tol", "1e-3",
               "--witness", str(w)])
    assert rc == EXIT_OK
    blob = json.loads(w.read_text())
    AdmissibleExtension(np.array(blob["cross"])).validate(sa.dist, sb.dist)


def test_gromov_cli_invalid_matrix_lists_triangle(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({
        "n": 3, "basepoint": 0,
        "dist": [[0, 5, 1], [5, 0, 1], [1, 1, 0]],
    }))
    other = tmp_path / "b.json"
    _write_space(other, [[0.0]])
    rc = main(["gromov", "--a", str(bad), "--b", str(other)])
    assert rc == EXIT_USAGE
    err = capsys.readouterr().err
    assert "triangle" in err


def test_kernel_table(tmp_path):
    out = tmp_path / "k.csv"
    rc = main(["kernel", "--space", "h3", "--t", "1.0,2.0", "--r-max", "4",
               "--points", "11", "--out", str(out)])
    assert rc == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "t,r,q"
    assert len(lines) == 1 + 2 * 11
    t, r, q = lines[1].split(",")
    assert float(q) == pytest.approx((2 * math.pi) ** -1.5 * math.exp(-0.5), rel=1e-10)


def test_missing_file_is_usage_error(tmp_path):
    assert main(["gromov", "--a", "/nope/a.json", "--b", "/nope/b.json"]) == EXIT_USAGE
