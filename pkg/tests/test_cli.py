import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hiopt.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def cfg(name):
    return json.loads((CONFIGS / f"{name}.json").read_text())


def write(tmp_path, data, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(p)


def test_validate_ex4(capsys):
    assert main(["validate", str(CONFIGS / "ex4.json")]) == 0
    assert "validation passed" in capsys.readouterr().out


def test_validate_wrong_degree(tmp_path):
    c = cfg("ex4")
    c["system"]["k"] = 1
    assert main(["validate", write(tmp_path, c)]) == 1


def test_validate_fixture_only(capsys):
    assert main(["validate", str(CONFIGS / "ex3.json")]) == 0
    assert "fixture-only" in capsys.readouterr().out


@pytest.mark.parametrize(
    "content",
    [
        None,  # missing file
        "{not json",
        '{"system": {}}',
        '{"system": {"weights": [1], "k": 2, "f": ["x1^3"], "G1": ["1"], "G2": [["1"]],'
        ' "h": ["x1"], "d": [0]}, "lyapunov": {"V": "x1^2/2", "nu": NaN}}',
        '{"system": {"weights": [1], "k": 2, "f": ["x2"], "G1": ["1"], "G2": [["1"]],'
        ' "h": ["x1"], "d": [0]}, "lyapunov": {"V": "x1^2/2", "nu": 2}}',
        '{"system": {"weights": [1], "k": 2, "f": ["t*x1"], "G1": ["1"], "G2": [["1"]],'
        ' "h": ["x1"], "d": [0]}, "lyapunov": {"V": "x1^2/2", "nu": 2}}',
        '{"system": {"weights": [1, 1], "k": 2, "f": ["x1"], "G1": ["1"], "G2": [["1"]],'
        ' "h": ["x1"], "d": [0]}, "lyapunov": {"V": "x1^2/2", "nu": 2}}',
    ],
)
def test_usage_errors(tmp_path, content, capsys):
    path = str(tmp_path / "missing.json") if content is None else write(tmp_path, content)
    assert main(["validate", path]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_arguments():
    with pytest.raises(SystemExit) as info:
        main(["reproduce", "ex9"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2


def test_synthesize_theta_zero(capsys):
    assert main(["synthesize", str(CONFIGS / "ex1.json")]) == 1
    assert "non-synthesizable: theta=0" in capsys.readouterr().err


def test_synthesize_report_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["synthesize", str(CONFIGS / "ex4.json"), "--budget", "1024"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    assert ra.pop("timestamp") and rb.pop("timestamp")
    assert ra == rb
    assert ra["seed"] == 42 and ra["version"]
    syn = ra["stages"]["synthesis"]
    assert syn["kappa"] == 11.0
    for key in ("rho1", "rho2", "rho3", "rho4", "rho", "kappa_c", "kappa1", "rho_m"):
        assert key in syn["constants"]
    assert syn["expressions"]["alpha_star"].startswith("numeric")
    # the echoed config re-runs to the same verdict and numbers
    c = tmp_path / "c.json"
    assert main(["synthesize", str(a), "--budget", "1024", "--out", str(c)]) == 0
    rc = json.loads(c.read_text())
    rc.pop("timestamp")
    assert rc == ra


def test_simulate_csv(tmp_path):
    out = tmp_path / "traj"
    assert main(["simulate", str(CONFIGS / "ex1.json"), "--out", str(out)]) == 0
    files = sorted(out.glob("*.csv"))
    assert len(files) == 1
    lines = files[0].read_text().splitlines()
    assert lines[0] == "t,x1,u,w1,y1,V,running_J"
    row = lines[-1].split(",")
    assert float(row[0]) == 10.0
    assert float(row[1]) == pytest.approx(1 / np.sqrt(101), abs=1e-6)
    assert float(row[-1]) == pytest.approx(np.log(101) / 10, abs=1e-4)
    for tok in lines[6].split(","):
        assert "%.17g" % float(tok) == tok
    report = json.loads((out / "report.json").read_text())
    assert report["stages"]["trajectories"][0]["file"] == files[0].name
    assert not list(out.glob(".*"))  # no temp files left behind


def test_simulate_ex2_cost(tmp_path, capsys):
    out = tmp_path / "e2"
    assert main(["simulate", str(CONFIGS / "ex2.json"), "--out", str(out), "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    runs = report["stages"]["trajectories"]
    assert len(runs) == 6
    for r in runs:
        if r["disturbance"]["kind"] == "custom":
            assert r["J_T"] == pytest.approx(2 * r["x0"][0] ** 2, rel=1e-6)
    header = (out / runs[0]["file"]).read_text().splitlines()[0]
    assert header == "t,x1,u,w1,y1,V,running_J"


def test_simulate_ex4_header(tmp_path):
    c = cfg("ex4")
    c["synthesis"]["samples"] = 1024
    c["simulate"]["T"] = 2
    c["simulate"]["disturbances"] = [{"kind": "worst_case"}]
    out = tmp_path / "e4"
    assert main(["simulate", write(tmp_path, c), "--out", str(out)]) == 0
    lines = next(out.glob("*.csv")).read_text().splitlines()
    assert lines[0] == "t,x1,x2,u,w1,y1,y2,V,running_J"
    first = lines[1].split(",")
    assert float(first[-1]) == pytest.approx(4 * np.sqrt(1 + 0.5**4), rel=1e-12)


def test_sweep_gain(capsys):
    assert main(["sweep-gain", str(CONFIGS / "ex4.json"), "--budget", "1024", "--gains", "0.4,2"]) == 0
    out = capsys.readouterr().out
    assert "not asserted" in out and "asserted, pass" in out


@pytest.mark.parametrize("ex", ["ex1", "ex3"])
def test_reproduce_fast(ex, capsys):
    assert main(["reproduce", ex]) == 0
    assert "[PASS]" in capsys.readouterr().out


def test_reproduce_json(tmp_path):
    out = tmp_path / "r.json"
    assert main(["reproduce", "ex2", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert rep["passed"] and len(rep["stages"]["criteria"]) == 3
    assert rep["stages"]["diagnostics"]["hji_residual"][1]["residual"] == pytest.approx(5.84375)


@pytest.mark.skipif(shutil.which("hiopt") is None, reason="console script not installed")
def test_console_script_exit_codes(tmp_path):
    r = subprocess.run(["hiopt", "validate", str(tmp_path / "none.json")], capture_output=True, text=True)
    assert r.returncode == 2
    r = subprocess.run([sys.executable, "-m", "hiopt.cli", "validate", str(CONFIGS / "ex4.json")],
                       capture_output=True, text=True)
    assert r.returncode == 0
