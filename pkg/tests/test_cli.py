import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from wpcn import cli, experiments

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
FIG5 = str(CONFIGS / "fig5.cfg")
SMALL_MC = ["--set", "num_users=3", "--set", "realizations=2", "--set",
            "sweep_p_avg_dbm=10,20", "--set", "modes=fd-perfect,hd"]


def run(argv, capsys):
    code = cli.run(argv)
    out, err = capsys.readouterr()
    return code, out, err


def parse_solve(text):
    lines = text.strip().splitlines()
    assert lines[0] == "slot,tau,power,energy"
    assert lines[-1].startswith("# wsr=")
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:-1]])
    return rows, float(lines[-1].split("=", 1)[1])


def test_solve_hd(capsys):
    code, out, _ = run(["solve", "--mode", "hd", "--config", FIG5], capsys)
    assert code == 0
    rows, wsr = parse_solve(out)
    assert rows[0, 2] == 200.0
    assert rows[:, 1].sum() == pytest.approx(1.0, abs=1e-8)
    assert wsr > 0.0


@pytest.mark.parametrize("mode", experiments.MODES)
def test_solve_modes_with_inline_gains(mode, capsys):
    code, out, _ = run(["solve", "--mode", mode, "--config", FIG5, "--alpha", "0.249,0.025"],
                       capsys)
    assert code == 0
    rows, _ = parse_solve(out)
    assert rows.shape == (3, 4)


def test_solve_summary_with_out(tmp_path, capsys):
    path = tmp_path / "s.csv"
    code, out, _ = run(["solve", "--mode", "hd", "--config", FIG5, "--out", str(path)], capsys)
    assert code == 0
    assert "P*=200" in out
    assert path.read_text().startswith("slot,tau,power,energy\n")


def test_solve_inline_errors(capsys):
    code, _, err = run(["solve", "--config", FIG5, "--gains", "1,2,3"], capsys)
    assert code == 1 and "--gains lists 3 values" in err
    code, _, err = run(["solve", "--config", FIG5, "--gains", "1,2", "--alpha", "1,2"], capsys)
    assert code == 1 and "either --gains or --alpha" in err
    code, _, err = run(["solve", "--config", FIG5, "--alpha", "a,b"], capsys)
    assert code == 1 and "comma-separated numbers" in err


def test_rate_region_csv(tmp_path, capsys):
    path = tmp_path / "r.csv"
    code, _, _ = run(["rate-region", "--config", FIG5, "--points", "5", "--out", str(path)],
                     capsys)
    assert code == 0
    text = path.read_bytes()
    assert text.startswith(b"w1,r1_bps_hz,r2_bps_hz\n")
    assert b"\r" not in text
    code, out, _ = run(["rate-region", "--config", FIG5, "--points", "5", "--no-filter"], capsys)
    assert len(out.strip().splitlines()) == 6


def test_rate_region_needs_two_users(capsys):
    code, _, err = run(["rate-region", "--set", "num_users=3"], capsys)
    assert code == 1 and "num_users = 2" in err


def test_monte_carlo_csv(tmp_path, capsys):
    path = tmp_path / "mc.csv"
    code, out, _ = run(["monte-carlo", "--config", str(CONFIGS / "fig7.cfg"), "--out", str(path)]
                       + SMALL_MC, capsys)
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "p_avg_dbm,mode,mean_sumrate_bps_hz,stderr,realizations"
    assert len(lines) == 1 + 2 * 2
    assert "4 of 4 cells" in out


def test_monte_carlo_sweep_columns(capsys):
    code, out, _ = run(["monte-carlo", "--modes", "hd", "--set", "sweep_num_users=2,3"]
                       + SMALL_MC[2:4], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].endswith(",num_users")
    assert lines[1].split(",")[-1] == "2"


def test_monte_carlo_bad_mode(capsys):
    code, _, err = run(["monte-carlo", "--modes", "fd"], capsys)
    assert code == 1 and "unknown mode" in err


def test_byte_identical_reruns(tmp_path, capsys):
    commands = [
        ["solve", "--mode", "fd-si", "--config", FIG5],
        ["rate-region", "--config", FIG5, "--points", "5"],
        ["monte-carlo", "--config", str(CONFIGS / "fig7.cfg")] + SMALL_MC,
    ]
    for i, argv in enumerate(commands):
        outs = []
        for j in range(2):
            path = tmp_path / f"{i}_{j}.csv"
            assert run(argv + ["--out", str(path)], capsys)[0] == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]


def test_verify(tmp_path, capsys):
    path = tmp_path / "v.csv"
    code, out, _ = run(["verify", "--instances", "2", "--grid", "40", "--out", str(path)], capsys)
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "instance,mode,solver_wsr,oracle_wsr,difference,status"
    assert len(lines) == 5 and all(line.endswith(",pass") for line in lines[1:])


def test_verify_failure_exit_code(monkeypatch, capsys):
    def off(*args, **kwargs):
        return [experiments.OracleCheck(0, "hd", 1.0, 1.5)]
    monkeypatch.setattr(experiments, "oracle_comparison", off)
    code, out, _ = run(["verify"], capsys)
    assert code == 2 and out.strip().endswith("fail")


def test_non_convergence_exit_code(monkeypatch, capsys):
    real = experiments.solve_mode

    def stalled(*args, **kwargs):
        return replace(real(*args, **kwargs), converged=False)
    monkeypatch.setattr(experiments, "solve_mode", stalled)
    assert run(["solve", "--config", FIG5], capsys)[0] == 2

    def broken(*args, **kwargs):
        raise ArithmeticError("price bracket diverged")
    monkeypatch.setattr(experiments, "solve_mode", broken)
    code, _, err = run(["solve", "--config", FIG5], capsys)
    assert code == 2 and "price bracket diverged" in err


def test_usage_errors_are_distinct(tmp_path, capsys):
    cases = {
        "missing": ["solve", "--config", str(tmp_path / "absent.cfg")],
        "flag": ["solve", "--bogus"],
        "key": ["solve", "--set", "bogus=1"],
        "write": ["solve", "--config", FIG5, "--out", str(tmp_path / "no" / "dir.csv")],
        "none": [],
    }
    messages = {}
    for name, argv in cases.items():
        code, _, err = run(argv, capsys)
        assert code == 1, name
        messages[name] = err
    assert "absent.cfg" in messages["missing"]
    assert "--bogus" in messages["flag"]
    assert "unknown config key 'bogus'" in messages["key"]
    assert "cannot write output file" in messages["write"]
    assert "subcommand is required" in messages["none"]
    assert len(set(messages.values())) == len(messages)


def test_help_exits_zero(capsys):
    assert run(["solve", "--help"], capsys)[0] == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wpcn", "solve", "--mode", "hd",
                           "--config", FIG5], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("slot,tau,power,energy\n")
