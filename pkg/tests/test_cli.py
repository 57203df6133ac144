import json
import subprocess
import sys

import pytest

from drumflux.cli import main


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_eval_circle(capsys, tmp_path):
    prof = tmp_path / "prof.csv"
    curve = tmp_path / "curve.csv"
    assert main(["eval", '{"type": "circle", "panels": 16}', "--profile", str(prof),
                 "--curve-csv", str(curve)]) == 0
    out = _json_out(capsys)
    assert out["k1"] == pytest.approx(2.404825557695773, abs=1e-8)
    assert abs(out["gauss_bonnet_error"]) < 1e-10
    assert prof.read_text().startswith("s,x,y,dnu_over_lambda")
    assert curve.exists()


def test_eval_from_file(tmp_path):
    spec = tmp_path / "d.json"
    spec.write_text(json.dumps({"type": "polar", "radii": [1, 1.2, 1.3, 1.2, 1], "alpha": 0.1}))
    out = tmp_path / "r.json"
    assert main(["eval", str(spec), "--out", str(out)]) == 0
    assert 0.3 < json.loads(out.read_text())["F"] < 0.37


def test_profile_command(capsys, tmp_path):
    path = tmp_path / "p.csv"
    assert main(["profile", '{"type": "semidisk", "N": 8, "alpha": 0.1}', "--out", str(path)]) == 0
    info = _json_out(capsys)
    assert info["G"] == pytest.approx(info["F"])
    assert len(path.read_text().splitlines()) == info["rows"] + 1


@pytest.mark.parametrize("spec", ['{"type": "circle"', '{"type": "hexagon"}', '{"type": "circle", "radius": "x"}',
                                  '{"type": "polar", "radii": [1, -1, 1]}', "nonexistent.json"])
def test_config_errors(spec):
    assert main(["eval", spec]) == 2


def test_solver_error():
    # no eigenvalue inside the bracket
    assert main(["eval", "circle", "--bracket", "0.5", "1.5"]) == 3


def test_semidisk_verify(capsys):
    assert main(["semidisk-verify", "--count", "3", "--seed", "7"]) == 0
    rep = _json_out(capsys)
    assert len(rep["fields"]) == 3 and rep["max_criticality_residual"] < 1e-10
    assert main(["semidisk-verify", "--field", "sin:1"]) == 0
    capsys.readouterr()
    assert main(["semidisk-verify", "--field", "const:1"]) == 2
    assert main(["semidisk-verify", "--field", "cos:1"]) == 2


def test_gradient_check_polar_vertex(capsys, tmp_path):
    out = tmp_path / "g.json"
    rc = main(["gradient-check", '{"type": "polar", "radii": [1, 1.3, 1.4, 1.2, 1], "alpha": 0.1}',
               "--vertices", "2", "--eps", "1e-3", "5e-4", "--out", str(out)])
    rep = json.loads(out.read_text())
    assert rc == 0, rep["max_rel_err"]
    assert len(rep["grad"]) == 5 and len(rep["fd_audit"]) == 1


def test_gradient_check_reports_failure(tmp_path):
    # an absurd tolerance must trip the audit exit code
    rc = main(["gradient-check", "circle", "--eps", "1e-3", "--tol", "1e-30", "--out", str(tmp_path / "g.json")])
    assert rc == 4


def test_optimize_and_resume(capsys, tmp_path):
    d = tmp_path / "run"
    cfg = json.dumps({"init": "square", "N0": 3, "N_target": 5, "K": 1})
    assert main(["optimize", "--config", cfg, "--out-dir", str(d)]) == 0
    rep = json.loads((d / "report.json").read_text())
    assert rep["N"] == 5
    for name in ("checkpoints.jsonl", "trajectory.csv", "final_curve.csv"):
        assert (d / name).exists()
    capsys.readouterr()
    assert main(["optimize", "--config", json.dumps({"N0": 5, "K": 1}), "--resume", str(d / "checkpoints.jsonl"),
                 "--out-dir", str(tmp_path / "run2")]) == 0
    assert main(["optimize", "--config", '{"bogus": 1}', "--out-dir", str(tmp_path / "x")]) == 2


def test_threads_flag_and_module_entry():
    assert main(["--threads", "0", "eval", "circle"]) == 2
    res = subprocess.run([sys.executable, "-m", "drumflux", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "semidisk-verify" in res.stdout
