import csv
import json

import pytest

from fraclap.cli import main


def test_kernel_dump(tmp_path):
    assert main(["kernel", "--alpha", "1", "--out", str(tmp_path), "--format", "csv"]) == 0
    rows = list(csv.reader(open(tmp_path / "kernel.csv")))
    assert rows[0] == ["t", "x", "density", "envelope_ratio"]
    assert len(rows) > 10


def test_solve_elliptic_json(tmp_path):
    assert main(["solve-elliptic", "--alpha", "1", "--grid", "64", "--out", str(tmp_path),
                 "--format", "json"]) == 0
    rows = json.loads((tmp_path / "elliptic.json").read_text())
    assert len(rows) == 64
    assert max(r["u"] for r in rows) == pytest.approx(1.0, abs=2e-2)


def test_solve_parabolic(tmp_path):
    assert main(["solve-parabolic", "--grid", "32", "--steps", "10", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "parabolic.csv").exists() and (tmp_path / "parabolic.json").exists()


def test_norms(tmp_path):
    assert main(["norms", "--grid", "64", "--p", "2", "--theta", "1", "--out", str(tmp_path),
                 "--format", "csv"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "norms.csv")))
    assert {r["norm_kind"] for r in rows} == {"lp", "lp_psi_minus_half_alpha"}
    assert all(r["divergence_flag"] == "0" for r in rows)


def test_mc(tmp_path, capsys):
    assert main(["mc", "--paths", "500", "--dt", "1e-2", "--seed", "3", "--out", str(tmp_path),
                 "--format", "csv"]) == 0
    assert "E_0 tau" in capsys.readouterr().out


def test_verify_and_report(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[sweep]\nladder = 128,256\nalpha = 1.0\n")
    code = main(["verify", "decay-holder", "--config", str(cfg), "--out", str(tmp_path)])
    body = json.loads((tmp_path / "decay-holder.json").read_text())["decay-holder"]
    assert code == (0 if body["passed"] else 1)
    assert body["provenance"]["seed"] == 20240601
    assert main(["report", "--out", str(tmp_path)]) == code


@pytest.mark.parametrize("argv", [
    [],
    ["verify", "nosuch"],
    ["solve-elliptic", "--alpha", "2.5"],
    ["solve-elliptic", "--alpha", "0.5,1"],
    ["kernel", "--format", "xml"],
    ["verify", "sharpness", "--p", "2"],
])
def test_usage_errors_exit_2(argv, tmp_path):
    try:
        code = main(argv + ["--out", str(tmp_path)] if argv else argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[sweep]\nbogus = 1\n")
    assert main(["verify", "sharpness", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_report_without_reports_exit_2(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 2
