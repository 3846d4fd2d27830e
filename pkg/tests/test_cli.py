import csv

import pytest

from app import cli
from app.exceptions import SoeConstructionError


def _rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


def test_coeffs_check_passes(settings, capsys):
    assert cli.cli_dispatch(["coeffs", "check", "--kmax", "50", "--alpha", "1.2,1.8"]) == cli.EXIT_OK
    assert "all pass" in capsys.readouterr().out


def test_coeffs_check_defaults_to_full_alpha_sweep(settings, monkeypatch):
    captured = {}
    real_check = cli.check_coefficient_properties

    def recording_check(kmax, alphas, tau):
        captured["alphas"] = list(alphas)
        return real_check(kmax, alphas, tau)

    monkeypatch.setattr(cli, "check_coefficient_properties", recording_check)
    assert cli.cli_dispatch(["coeffs", "check", "--kmax", "20"]) == cli.EXIT_OK
    assert captured["alphas"] == pytest.approx([1.05 + 0.05 * i for i in range(19)])
    assert captured["alphas"][0] == 1.05 and captured["alphas"][-1] == 1.95


def test_soe_check(settings, capsys):
    assert cli.cli_dispatch(["soe", "check", "--gamma", "0.5", "--eps", "1e-10", "--delta", "1e-4"]) == cli.EXIT_OK
    assert "N_exp=" in capsys.readouterr().out


def test_soe_construction_failure_exits_with_numerical_code(settings, monkeypatch, capsys):
    def failing(*args):
        raise SoeConstructionError("node budget exhausted")

    monkeypatch.setattr(cli, "build_soe", failing)
    assert cli.cli_dispatch(["soe", "check", "--gamma", "0.5", "--delta", "1e-4"]) == cli.EXIT_NUMERICAL
    assert "node budget" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--frobnicate"],
        ["soe", "check", "--gamma", "1.5", "--delta", "1e-4"],
        ["solve", "--alpha", "2.5"],
        ["convergence", "--example", "ex51", "--N", "8,12", "--M", "8"],
        [],
    ],
)
def test_invalid_input_exits_with_usage_code(settings, argv):
    assert cli.cli_dispatch(argv) == cli.EXIT_INVALID


def test_operator_scan_writes_orders(settings, tmp_path, capsys):
    out = tmp_path / "scan.csv"
    code = cli.cli_dispatch(["operator", "scan", "--mu", "5", "--alpha", "1.5", "--N", "64,128,256", "--out", str(out)])
    assert code == cli.EXIT_OK
    rows = _rows(out)
    assert [row["N"] for row in rows] == ["64", "128", "256"]
    assert rows[0]["order"] == ""
    assert 1.8 <= float(rows[-1]["order"]) <= 2.2


def test_solve_writes_level_norms(settings, tmp_path, capsys):
    out = tmp_path / "levels.csv"
    code = cli.cli_dispatch(["solve", "--example", "ex51", "--N", "16", "--M", "16", "--scheme", "h3n3-fast", "--out", str(out)])
    assert code == cli.EXIT_OK
    rows = _rows(out)
    assert len(rows) == 17
    assert float(rows[0]["inf"]) == 0.0
    assert float(rows[-1]["t"]) == 1.0
    assert float(rows[-1]["inf"]) == pytest.approx(0.2, rel=0.05)
    assert "N_exp=" in capsys.readouterr().out


def test_solve_warns_about_incompatible_data(settings, tmp_path, capsys):
    out = tmp_path / "levels.csv"
    code = cli.cli_dispatch(
        ["solve", "--example", "ex52", "--N", "8", "--M", "8", "--scheme", "h3n3-graded", "--r", "2", "--out", str(out)]
    )
    assert code == cli.EXIT_OK
    assert "warning:" in capsys.readouterr().err


def test_convergence_sweep(settings, tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = cli.cli_dispatch(
        ["convergence", "--example", "ex51", "--scheme", "h3n3-direct", "--alpha", "1.5",
         "--N", "8,16", "--M", "8", "--no-timing", "--out", str(out)]
    )
    assert code == cli.EXIT_OK
    rows = _rows(out)
    assert len(rows) == 2
    assert rows[0]["order"] == "" and rows[1]["order"] != ""
    assert rows[1]["seconds"] == ""
    assert "ex51 / h3n3-direct" in capsys.readouterr().out


def test_convergence_from_config_file(settings, tmp_path):
    config = tmp_path / "sweep.env"
    out = tmp_path / "graded.csv"
    config.write_text(f"example=ex52\nscheme=h3n3-graded\nalpha=1.5\nN=8,16\nM=8\nout={out}\n")
    assert cli.cli_dispatch(["convergence", "--config", str(config)]) == cli.EXIT_OK
    assert [row["N"] for row in _rows(out)] == ["8", "16"]


def test_default_sweep_lists_follow_profile(settings, monkeypatch):
    captured = {}

    def fake_run(config):
        captured["config"] = config
        from app.services.experiments import ConvergenceReport

        return ConvergenceReport(scheme=config.scheme, example=config.example, soe_epsilon=config.soe_epsilon)

    monkeypatch.setattr(cli, "run_example_52", fake_run)
    assert cli.cli_dispatch(["convergence", "--example", "ex52"]) == cli.EXIT_OK
    config = captured["config"]
    assert config.scheme == "h3n3-graded-fast"
    assert config.r == 2.0
    assert config.n_list == [32, 64, 128, 256]
    assert config.m_list == [settings.desk_m]
