import subprocess
import sys

import pytest
import yaml

from lfpsim.cli import main
from lfpsim.harness import read_csv

SHORT = ["--set", "stop.t_end=30"]


def test_run_writes_csv_and_summary(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["run", *SHORT, "-o", str(out)]) == 0
    summary = yaml.safe_load(capsys.readouterr().out)
    assert summary["t_final"] == 30.0 and summary["stop_reason"] == "time"
    assert len(read_csv(out)) == 61


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["run", "--set", "grid.N3=0"]) == 2
    assert "config error" in capsys.readouterr().err
    bad = tmp_path / "c.yaml"
    bad.write_text("grid: {N9: 3}\n")
    assert main(["print-config", "-c", str(bad)]) == 2


def test_solver_error_exit_code(capsys):
    # ten times 1C exceeds the saturated kinetic capacity of the electrode
    assert main(["run", "--set", "profile.rate=10", "--set", "stop.t_end=5"]) == 3
    assert "kinetic limit" in capsys.readouterr().err


def test_numeric_error_exit_code(tmp_path, capsys):
    out = tmp_path / "n.csv"
    assert main(["run", *SHORT, "--set", "params.D_solid=1e-10", "-o", str(out)]) == 4
    assert "numeric failure" in capsys.readouterr().err
    assert "# diagnostic:" in out.read_text()


def test_print_config_round_trips(tmp_path, capsys):
    assert main(["print-config", "--set", "grid.N3=8"]) == 0
    text = capsys.readouterr().out
    f = tmp_path / "c.yaml"
    f.write_text(text)
    assert main(["print-config", "-c", str(f)]) == 0
    assert capsys.readouterr().out == text


def test_describe_grid(capsys):
    assert main(["describe-grid", "--set", "grid.N3=3"]) == 0
    d = yaml.safe_load(capsys.readouterr().out)
    assert len(d["nodes_m"]) == 9 and d["interface_index"] == 4
    assert d["radial"][0]["gamma"][1] == pytest.approx(4.493409457909, abs=1e-9)


def test_dt_study_table(tmp_path, capsys):
    table = tmp_path / "dt.yaml"
    assert main(["dt-study", *SHORT, "--periods", "3", "--reference", "1", "--table", str(table)]) == 0
    rows = yaml.safe_load(capsys.readouterr().out)
    assert rows == yaml.safe_load(table.read_text())
    assert rows[-1]["max_dV"] == 0.0


def test_convergence_and_timing(capsys):
    assert main(["convergence-study", *SHORT, "--orders", "3", "--reference", "4"]) == 0
    rows = yaml.safe_load(capsys.readouterr().out)
    assert [r["N3"] for r in rows] == [3, 4]
    assert main(["timing-report", "--set", "stop.t_end=30", "--rates", "1"]) == 0
    rows = yaml.safe_load(capsys.readouterr().out)
    assert rows[0]["label"] == "1C"


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "lfpsim", "print-config"], capture_output=True, text=True)
    assert out.returncode == 0 and "params" in out.stdout
