import csv
import io
import json
import math
import subprocess
import sys

import pytest

from obata_robin.cli import ConfigError, main, parse_grid, read_config


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_eigen_json_report(capsys):
    code, out, _ = run(capsys, "eigen", "--n", "3", "--theta", str(math.pi / 4))
    assert code == 0
    rep = json.loads(out)
    assert set(rep) >= {"command", "parameters", "data", "checks", "pass"}
    assert rep["pass"] is True and rep["command"] == "eigen"
    assert rep["parameters"]["a"] == pytest.approx(1.0, abs=1e-12)
    names = {c["name"] for c in rep["checks"]}
    assert "eigen.xi_minus_n" in names
    assert all(set(c) == {"name", "value", "tolerance", "pass"} for c in rep["checks"])


def test_a_flag_derives_theta(capsys):
    code, out, _ = run(capsys, "eigen", "--n", "2", "--a", "1.0")
    assert code == 0
    assert json.loads(out)["parameters"]["theta"] == pytest.approx(math.pi / 4, abs=1e-12)


@pytest.mark.parametrize("argv", [
    ["eigen", "--n", "3", "--theta", "2.0"],
    ["eigen", "--n", "3", "--theta", "0.5", "--a", "1.0"],
    ["eigen", "--n", "3", "--theta", "0.5", "--tol", "eigen.xi_minus_n=-1"],
    ["eigen", "--n", "3", "--theta", "0.5", "--tol", "no.such.check=1e-3"],
    ["eigen", "--theta", "0.5"],
    ["nonsense"],
    ["flow", "--n", "3", "--theta", "0.5", "--starts", "many"],
])
def test_configuration_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err


def test_failing_check_exit_1(capsys):
    code, out, err = run(capsys, "eigen", "--n", "3", "--theta", "0.6", "--tol", "eigen.bc_residual=1e-20")
    assert code == 1
    assert "FAIL: eigen.bc_residual" in err
    assert json.loads(out)["pass"] is False


def test_csv_format(capsys):
    code, out, _ = run(capsys, "reilly", "--n", "3", "--R", "1.0", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["name", "value", "tolerance", "pass"]
    assert {r[0] for r in rows[1:]} == {"reilly.defect.cos", "reilly.defect.r_squared"}


def test_config_file_and_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# reilly run\nn = 4\nR = 0.8\ntol.reilly.defect = 1e-5\n")
    code, out, _ = run(capsys, "reilly", "--config", str(cfg), "--R", "1.1")
    assert code == 0
    rep = json.loads(out)
    assert rep["parameters"]["n"] == 4 and rep["parameters"]["R"] == 1.1
    assert all(c["tolerance"] == 1e-5 for c in rep["checks"])
    bad = tmp_path / "bad.cfg"
    bad.write_text("n = 4\ncolour = blue\n")
    assert run(capsys, "reilly", "--config", str(bad), "--R", "1.0")[0] == 2
    assert run(capsys, "reilly", "--config", str(tmp_path / "missing.cfg"))[0] == 2


def test_read_config_syntax(tmp_path):
    p = tmp_path / "x.cfg"
    p.write_text("just words\n")
    with pytest.raises(ConfigError):
        read_config(str(p))


def test_output_file_and_determinism(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert run(capsys, "flow", "--n", "3", "--m", "1", "--theta", "0.7", "--starts", "10",
                   "--dt", "5e-3", "--seed", "3", "--output", str(p))[0] == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert json.loads(paths[0].read_text())["parameters"]["seed"] == 3


@pytest.mark.parametrize("argv", [
    ["phi", "--a", "-1.0"],
    ["jet", "--theta", "0.6", "--K", "4"],
    ["jet", "--theta", "0.6", "--float"],
    ["boundary", "--n", "3", "--m", "1", "--theta", "0.6", "--samples", "5"],
])
def test_other_commands_pass(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    assert json.loads(out)["pass"] is True


def test_eigen_sweep(capsys):
    code, out, _ = run(capsys, "sweep", "--command", "eigen", "--grid", "n=2,3", "--grid",
                       "theta=0.5,0.9", "--seed", "5")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "# seed=5"
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert len(rows) == 4 and all(r["pass"] == "true" for r in rows)
    assert all(abs(float(r["xi"]) - int(r["n"])) <= 1e-6 for r in rows)


def test_empty_sweep_is_header_only(capsys):
    code, out, _ = run(capsys, "sweep", "--command", "eigen")
    assert code == 0
    assert out.splitlines()[1].startswith("n,theta,a,R,ell,bc,xi")
    assert len(out.splitlines()) == 2


def test_flow_sweep_rows(capsys):
    code, out, _ = run(capsys, "sweep", "--command", "flow", "--grid", "n=3", "--grid", "theta=0.6",
                       "--grid", "m=1", "--dt", "5e-3")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO("\n".join(out.splitlines()[1:]))))
    assert len(rows) == 100
    assert {r["terminal_event"] for r in rows} == {"interior_max"}


def test_sweep_grid_errors():
    with pytest.raises(ConfigError):
        parse_grid(["bc=robin"], "flow")
    with pytest.raises(ConfigError):
        parse_grid(["theta=0.5", "a=1.0"], "eigen")
    with pytest.raises(ConfigError):
        parse_grid(["n=2", "n=3"], "eigen")


def test_verify_all_quick(capsys):
    code, out, err = run(capsys, "verify-all", "--profile", "quick")
    assert code == 0, err
    rep = json.loads(out)
    assert rep["pass"] is True and len(rep["checks"]) > 10


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "obata_robin", "reilly", "--n", "2", "--R", "0.5"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["pass"] is True
