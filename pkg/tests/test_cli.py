"""Tests for the command-line entry point."""
import json
from pathlib import Path

import pandas as pd
import pytest
from click.testing import CliRunner

from run import main, run_cli

BASE = ["--scenario", "3,3,3,3x8", "--streams", "2,2,2,2", "--trials", "2", "--frames", "2",
        "--max-iters", "5", "--no-progress", "--log-level", "ERROR"]


@pytest.fixture
def runner():
    return CliRunner()


def test_csv_has_one_row_per_grid_point(runner, tmp_path):
    out = tmp_path / "results.csv"
    result = runner.invoke(main, BASE + ["--algo", "dthp", "--mod", "qpsk", "--ebn0", "0:4:28",
                                         "--seed", "7", "--out", str(out)])
    assert result.exit_code == 0, result.output
    df = pd.read_csv(out)
    assert len(df) == 8
    assert list(df["ebn0_db"]) == [0, 4, 8, 12, 16, 20, 24, 28]
    assert set(df["algo"]) == {"dTHP"}


def test_identical_runs_are_byte_identical(runner, tmp_path):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        result = runner.invoke(main, BASE + ["--algo", "all", "--ebn0", "0:10:20", "--seed", "3",
                                             "--out", str(p)])
        assert result.exit_code == 0, result.output
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_overloaded_streams_rejected(runner):
    result = runner.invoke(main, ["--scenario", "3,3,3,3x8", "--streams", "3,3,3,3"])
    assert result.exit_code == 2
    assert "exceed" in result.output


@pytest.mark.parametrize("args", [
    ["--scenario", "three users"],
    ["--scenario", "2,2x4", "--streams", "2"],
    ["--scenario", "2,2x4", "--ebn0", "10:1:0"],
    ["--scenario", "2,2x4", "--profile", "nightly"],
    ["--scenario", "2,2x4", "--mod", "8psk"],
])
def test_usage_errors(runner, args):
    assert runner.invoke(main, args).exit_code == 2


def test_json_to_stdout(runner):
    result = runner.invoke(main, BASE + ["--algo", "zf", "--ebn0", "0:5:5", "--format", "json"])
    assert result.exit_code == 0, result.output
    records = json.loads(result.output)
    assert [r["algo"] for r in records] == ["ZF-CBF", "ZF-CBF"]


def test_sum_rate_only_with_bound(runner, tmp_path):
    out = tmp_path / "rates.csv"
    result = runner.invoke(main, ["--scenario", "2,2,2,2x8", "--algo", "cthp", "--ebn0", "0:10:10",
                                  "--trials", "2", "--frames", "0", "--init", "identity",
                                  "--with-bound", "--no-progress", "--out", str(out)])
    assert result.exit_code == 0, result.output
    df = pd.read_csv(out)
    assert list(df["algo"]) == ["cTHP", "cTHP", "Coop-Bound", "Coop-Bound"]
    assert df["ber"].isna().all()
    assert (df.loc[df["algo"] == "cTHP", "avg_iterations"] == 1).all()


def test_run_cli_exit_codes(tmp_path):
    ok = run_cli(BASE + ["--algo", "dthp", "--ebn0", "0:1:0", "--out", str(tmp_path / "r.csv")])
    assert ok == 0
    assert run_cli(["--scenario", "3,3,3,3x8", "--streams", "3,3,3,3"]) == 2


def test_profile_supplies_defaults(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("THP_PROFILE", "quick")
    out = tmp_path / "quick.csv"
    result = runner.invoke(main, ["--scenario", "2,2x4", "--algo", "dthp", "--ebn0", "0:1:0",
                                  "--max-iters", "3", "--no-progress", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert pd.read_csv(out)["trials"].tolist() == [20]


def test_bare_out_name_is_written_in_place(runner):
    with runner.isolated_filesystem() as cwd:
        result = runner.invoke(main, BASE + ["--algo", "zf", "--ebn0", "0:1:0", "--out", "results.csv"])
        assert result.exit_code == 0, result.output
        assert (Path(cwd) / "results.csv").is_file()
        assert not (Path(cwd) / "results").exists()


def test_preset_matches_explicit_scenario(runner):
    args = ["--trials", "1", "--frames", "1", "--max-iters", "3", "--no-progress",
            "--log-level", "ERROR", "--algo", "dthp", "--ebn0", "0:1:0"]
    preset = runner.invoke(main, args + ["--preset", "overloaded"])
    explicit = runner.invoke(main, args + ["--scenario", "3,3,3,3x8", "--streams", "2,2,2,2"])
    assert preset.exit_code == 0, preset.output
    assert preset.output == explicit.output


@pytest.mark.parametrize("extra", [[], ["--preset", "normal", "--scenario", "2,2x4"],
                                   ["--preset", "normal", "--streams", "1,1,1,1"]])
def test_scenario_source_must_be_unique(runner, extra):
    result = runner.invoke(main, ["--no-progress"] + extra)
    assert result.exit_code == 2
