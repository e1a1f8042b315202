import json
import os

import numpy as np
import pytest

from carnotwave.cli import main


def run_cli(args):
    return main(args)


def test_group_validate_heisenberg(tmp_path, capsys):
    rc = run_cli(["group", "validate", "--group", "heisenberg", "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "group_validate.json").read_text())
    assert report["classification"]["is_htype"] is True
    assert report["all_passed"] is True


def test_group_validate_free3(tmp_path):
    rc = run_cli(["group", "validate", "--group", "free3", "--out", str(tmp_path)])
    assert rc == 0
    report = json.loads((tmp_path / "group_validate.json").read_text())
    assert report["classification"]["is_metivier"] is False


def test_group_validate_bad_bracket(tmp_path, capsys):
    bad = {"d1": 2, "d2": 1, "bracket": [[[0.0, 1.0], [-0.5, 0.0]]]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    rc = run_cli(["group", "validate", "--group", str(path)])
    err = capsys.readouterr().err
    assert rc == 2
    assert "k=0" in err and "i=0" in err and "j=1" in err


def test_unknown_tolerance_key_is_usage_error(capsys):
    rc = run_cli(["verify", "all", "--tol", "nonsense=1"])
    assert rc == 2


def test_verify_subset_deterministic(tmp_path):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    out1.mkdir()
    out2.mkdir()
    args = ["verify", "all", "--group", "heisenberg", "--seed", "11",
            "--suites", "carnot", "flow"]
    assert run_cli(args + ["--out", str(out1)]) == 0
    assert run_cli(args + ["--out", str(out2)]) == 0
    b1 = (out1 / "verify_all.json").read_bytes()
    b2 = (out2 / "verify_all.json").read_bytes()
    assert b1 == b2


def test_verify_forced_failure(tmp_path):
    rc = run_cli([
        "verify", "all", "--group", "heisenberg", "--suites", "flow",
        "--tol", "flow.symplectic=1e-20", "--out", str(tmp_path),
    ])
    assert rc == 1
    report = json.loads((tmp_path / "verify_all.json").read_text())
    failed = [c for c in report["checks"] if not c["passed"]]
    assert any(c["name"] == "flow.symplectic" for c in failed)


def test_sphere_sample_rows(tmp_path):
    rc = run_cli(["sphere", "sample", "--group", "heisenberg", "--t", "1.0",
                  "--count", "50", "--out", str(tmp_path), "--jobs", "2"])
    assert rc == 0
    lines = (tmp_path / "sphere.csv").read_text().strip().splitlines()
    assert len(lines) == 51  # header + rows
    manifest = json.loads((tmp_path / "sphere_manifest.json").read_text())
    assert manifest["inputs"]["rows"] == 50
    assert manifest["seed"] == 1


def test_phase_eval_json(tmp_path):
    rc = run_cli(["phase", "eval", "--group", "heisenberg", "--t", "0.5",
                  "--x", "0.3", "0.1", "--u", "0.05", "--xi", "1.0", "0.2",
                  "--mu", "0.8", "--out", str(tmp_path)])
    assert rc == 0
    rec = json.loads((tmp_path / "phase_eval.json").read_text())
    assert rec["im_part"] >= 0
    assert "re" in rec["density"]


def test_decompose_directions_csv(tmp_path):
    rc = run_cli(["decompose", "directions", "--d", "3", "--m", "2",
                  "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "directions_d3_m2.csv").read_text().strip().splitlines()
    assert len(lines) > 10


def test_fio_eval_json(tmp_path):
    rc = run_cli(["fio", "eval", "--group", "heisenberg", "--m", "2",
                  "--t", "0.0", "--x", "0", "0", "--u", "0", "--nodes", "24",
                  "--out", str(tmp_path)])
    assert rc == 0
    rec = json.loads((tmp_path / "fio_eval.json").read_text())
    assert rec["value_re"] > 0
    assert abs(rec["value_im"]) <= 1e-10
    assert rec["refine_error"] >= 0


def test_bench_runs(capsys):
    rc = run_cli(["bench", "--nodes", "2000", "--points", "8", "--pack", "5000"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "phase_sum" in out and "greedy_pack" in out


def test_usage_error_exit_code():
    assert run_cli(["fio", "eval", "--x", "0"]) == 2 or run_cli(["nonsense"]) == 2
