import json
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "itosym.cli"]


def run_cli(*args):
    return subprocess.run(CLI + list(args), capture_output=True, text=True)


@pytest.fixture()
def configs(tmp_path):
    files = {}

    def write(name, payload):
        path = tmp_path / name
        path.write_text(json.dumps(payload))
        files[name] = str(path)

    write("power_b.json", {
        "drift": {"family": "B", "params": {"c0": 0.4, "c1": -0.5}},
        "noise": {"kind": "simple", "s": 1.0, "k": 2.0},
        "domain": [0, None],
    })
    write("const_b.json", {
        "drift": {"family": "B", "params": {"c0": 1.0, "c1": -1.0}},
        "noise": {"kind": "constant", "s": 1.0},
    })
    write("quadratic.json", {
        "drift": {"expr": "x^2"},
        "noise": {"kind": "constant", "s": 1.0},
    })
    write("timedep_power.json", {
        "drift": {"expr": "x*t"},
        "noise": {"kind": "simple", "s": 1.0, "k": 2.0},
    })
    write("explosive_c.json", {
        "drift": {"family": "C", "params": {"c0": 0.0, "c1": 1.0, "beta": 1.0}},
        "noise": {"kind": "constant", "s": 1.0},
    })
    broken = tmp_path / "broken.json"
    broken.write_text("{\"drift\": ")
    files["broken.json"] = str(broken)
    return files


def test_classify_exit_codes(configs):
    res = run_cli("--deterministic", "classify", configs["power_b.json"])
    assert res.returncode == 0
    report = json.loads(res.stdout)
    assert report["case"] == "B"
    assert report["params"]["c1"] == pytest.approx(-0.5, abs=1e-9)

    res = run_cli("--deterministic", "classify", configs["quadratic.json"])
    assert res.returncode == 3
    assert json.loads(res.stdout)["case"] == "unclassified"

    res = run_cli("classify", configs["broken.json"])
    assert res.returncode == 1
    assert "config error" in res.stderr


def test_classify_evaluation_error_exit(configs):
    res = run_cli("classify", configs["timedep_power.json"])
    assert res.returncode == 2
    assert "evaluation error" in res.stderr


def test_symmetry_command_with_w_part(configs):
    res = run_cli("--deterministic", "symmetry", configs["const_b.json"],
                  "--w-r", "1.0")
    assert res.returncode == 0
    report = json.loads(res.stdout)
    assert report["case"] == "B"
    assert report["wSymmetry"]["r"] == 1.0

    res = run_cli("--deterministic", "symmetry", configs["power_b.json"],
                  "--w-r", "1.0")
    assert res.returncode == 0
    report = json.loads(res.stdout)
    assert report["wSymmetry"] is None
    assert "constant noise" in report["wSymmetryNote"]


def test_verify_reports_residuals_and_obstruction(configs):
    res = run_cli("--deterministic", "--seed", "5", "verify",
                  configs["power_b.json"], "--points", "30")
    assert res.returncode == 0
    report = json.loads(res.stdout)
    assert report["maxAbsR1"] <= 1e-6
    assert report["maxAbsR2"] <= 1e-6
    assert report["maxAbsFirstOrder"] <= 1e-6
    assert report["wObstructionUnitR"] == 2.0


def test_verify_explicit_phi(configs):
    res = run_cli("--deterministic", "verify", configs["const_b.json"],
                  "--points", "20", "--phi", "exp(-1*t)")
    assert res.returncode == 0
    assert json.loads(res.stdout)["maxAbsR1"] <= 1e-6

    res = run_cli("verify", configs["const_b.json"], "--phi", "0")
    assert res.returncode == 1
    assert "trivial symmetry" in res.stderr


def test_integrate_writes_csv_and_figure(configs, tmp_path):
    out = tmp_path / "out"
    res = run_cli("--deterministic", "--seed", "2", "--out", str(out),
                  "integrate", configs["const_b.json"], "--paths", "3",
                  "--dt", "0.01")
    assert res.returncode == 0
    report = json.loads(res.stdout)
    assert report["truncated"] == {"exact": 0, "scheme": 0}
    csv = (out / "path_0000.csv").read_text().splitlines()
    assert csv[0] == "t,w,x_exact,x_scheme"
    assert len(csv) == 102
    # 17 significant digits: parsing back is bit-exact
    cell = csv[5].split(",")[2]
    assert float(f"{float(cell):.17g}") == float(cell)
    assert (out / "paths.png").exists()
    assert (out / "integrate.json").exists()


def test_integrate_dt_larger_than_span(configs):
    res = run_cli("integrate", configs["const_b.json"], "--dt", "5")
    assert res.returncode == 1


def test_integrate_all_paths_truncated(configs, tmp_path):
    res = run_cli("--deterministic", "--seed", "0", "--out", str(tmp_path / "o"),
                  "integrate", configs["explosive_c.json"], "--paths", "4",
                  "--dt", "0.005", "--x0", "2.0", "--t1", "2.0")
    assert res.returncode == 4
    report = json.loads(res.stdout)
    assert report["blowUpFraction"] == 1.0


def test_convergence_command(configs, tmp_path):
    out = tmp_path / "conv"
    res = run_cli("--deterministic", "--seed", "1", "--out", str(out),
                  "convergence", configs["const_b.json"], "--levels", "4",
                  "--paths", "12", "--n-base", "8")
    assert res.returncode == 0
    report = json.loads(res.stdout)
    assert len(report["rows"]) == 4
    assert 0.5 <= report["slope"] <= 1.5
    assert (out / "convergence.png").exists()

    res = run_cli("convergence", configs["const_b.json"], "--levels", "3")
    assert res.returncode == 1


def test_reports_deterministic_with_flag(configs):
    a = run_cli("--deterministic", "--seed", "9", "classify", configs["power_b.json"])
    b = run_cli("--deterministic", "--seed", "9", "classify", configs["power_b.json"])
    assert a.stdout == b.stdout
    # without the flag a timestamp field appears
    c = run_cli("--seed", "9", "classify", configs["power_b.json"])
    assert "generatedAt" in json.loads(c.stdout)
