import json
import subprocess
import sys

import pytest

from ddsde_avg.cli import main

CFG = """[experiment]
kind = strong_study
seed = 5

[drift]
name = mean_reversion

[sim]
dt_ratio = 20
n_particles = 20
n_replicas = 2

[study]
eps_grid = 0.25, 0.125, 0.0625
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text(CFG)
    return str(p)


def test_pass_exit_zero(cfg, tmp_path, capsys):
    assert main(["strong-study", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert "gate slope: PASS" in capsys.readouterr().out


def test_global_flags_before_subcommand(cfg, tmp_path):
    out = tmp_path / "o2"
    assert main(["--seed", "77", "--threads", "2", "--out", str(out), "strong-study", "--config", cfg]) == 0
    s = json.load(open(out / "strong_study_summary.json"))
    assert s["seed"] == 77 and s["cli_overrides"]["threads"] == 2


def test_gate_failure_exit_one(tmp_path):
    p = tmp_path / "f.ini"
    p.write_text(CFG + "band = -10\n")
    assert main(["strong-study", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert (tmp_path / "o" / "strong_study.csv").exists()


@pytest.mark.parametrize("text", [CFG + "bogus = 1\n", CFG.replace("seed = 5\n", ""),
                                  CFG.replace("0.25, 0.125", "0.125, 0.25")])
def test_config_errors_exit_two(tmp_path, text, capsys):
    p = tmp_path / "e.ini"
    p.write_text(text)
    assert main(["strong-study", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "error:" in capsys.readouterr().err


def test_kind_mismatch_and_missing_config(cfg, tmp_path):
    assert main(["weak-study", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert main(["kbm-check", "--out", str(tmp_path)]) == 2


def test_rates_table(tmp_path, capsys):
    code = main(["rates", "--alpha", "0.5", "--d", "2", "--p0", "3", "--alpha2", "1.5",
                 "--eps", "0.0625,0.00390625", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "weak_exponent" in out and "supremal, not attained" in out
    assert (tmp_path / "rates_table.csv").exists()


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "ddsde_avg.cli", "rates", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
