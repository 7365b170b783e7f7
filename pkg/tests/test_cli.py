"""End-to-end tests of the command-line runs."""

import json

import pandas as pd
import pytest

from conftest import write_csv
from matchfn.cli import ExitCode, main
from matchfn.config import reset_config_cache

SMALL_GRID = ["--bandwidth", "0.1", "--grid-psi", "30", "--grid-lambda", "8"]


@pytest.fixture(autouse=True)
def fresh_environment(monkeypatch):
    monkeypatch.delenv("MATCHFN_THREADS", raising=False)
    reset_config_cache()
    yield
    reset_config_cache()


@pytest.fixture
def simulated(tmp_path):
    """A 120-period synthetic panel written by the simulate run."""
    outdir = tmp_path / "sim"
    assert main(["simulate", "--outdir", str(outdir), "--periods", "120", "--seed", "3"]) == ExitCode.OK
    return outdir / "panel.csv"


@pytest.fixture
def three_regions(tmp_path):
    outdir = tmp_path / "regions"
    argv = ["simulate", "--outdir", str(outdir), "--periods", "60", "--seed", "8"]
    for region in ("A", "B", "C"):
        argv += ["--region", region]
    assert main(argv) == ExitCode.OK
    return outdir / "panel.csv"


class TestSimulate:
    def test_writes_panel_truth_and_config_echo(self, tmp_path, capsys):
        outdir = tmp_path / "out"
        assert main(["simulate", "--outdir", str(outdir), "--periods", "50"]) == ExitCode.OK

        for name in ("panel.csv", "truth.csv", "dgp_config.json", "resolved_config.json"):
            assert (outdir / name).exists()
        assert f"wrote {outdir / 'panel.csv'}" in capsys.readouterr().out
        assert len(pd.read_csv(outdir / "panel.csv")) == 50

    def test_rerun_from_config_echo_is_byte_identical(self, tmp_path):
        first, second = tmp_path / "first", tmp_path / "second"
        assert main(["simulate", "--outdir", str(first), "--periods", "80", "--seed", "11", "--alpha", "0.3"]) == 0

        echo = first / "resolved_config.json"
        assert main(["simulate", "--config", str(echo), "--outdir", str(second)]) == ExitCode.OK

        for name in ("panel.csv", "truth.csv", "dgp_config.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()
        assert json.loads(echo.read_text())["dgp"]["alpha"] == 0.3

    def test_config_for_another_subcommand(self, tmp_path):
        outdir = tmp_path / "out"
        main(["simulate", "--outdir", str(outdir), "--periods", "20"])

        code = main(["validate", "--config", str(outdir / "resolved_config.json"), "--outdir", str(outdir)])
        assert code == ExitCode.CONFIG


class TestExitCodes:
    def test_bad_alpha_is_a_config_error(self, tmp_path, capsys):
        assert main(["validate", "--outdir", str(tmp_path), "--alpha", "1.5"]) == ExitCode.CONFIG
        assert "alpha" in capsys.readouterr().err

    def test_estimate_without_input(self, tmp_path):
        assert main(["estimate", "--outdir", str(tmp_path)]) == ExitCode.CONFIG

    def test_missing_input_file(self, tmp_path):
        code = main(["estimate", "--input", str(tmp_path / "nope.csv"), "--outdir", str(tmp_path)])
        assert code == ExitCode.IO

    def test_missing_column(self, tmp_path, capsys):
        path = write_csv(tmp_path / "p.csv", "period,users,hires\n2020-01,1,1\n")

        assert main(["diagnose", "--input", str(path), "--outdir", str(tmp_path)]) == ExitCode.ESTIMATION
        assert "[panel-core]" in capsys.readouterr().err

    def test_bad_thread_setting(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MATCHFN_THREADS", "0")
        reset_config_cache()

        assert main(["simulate", "--outdir", str(tmp_path)]) == ExitCode.CONFIG


class TestDiagnose:
    def test_zero_users_month(self, tmp_path):
        path = write_csv(
            tmp_path / "p.csv",
            "period,users,vacancies,hires\n"
            "2020-01,100,50,40\n"
            "2020-02,0,10,5\n"
            "2020-03,120,60,45\n",
        )
        outdir = tmp_path / "out"

        assert main(["diagnose", "--input", str(path), "--outdir", str(outdir)]) == ExitCode.OK

        lines = (outdir / "diagnostics.csv").read_text().splitlines()
        assert lines[0] == "period,region,tightness,job_finding_rate,worker_finding_rate"
        assert lines[1] == "2020-01,,0.5,0.4,0.8"
        assert lines[2] == "2020-02,,,,0.5"
        for name in ("tightness.svg", "hires.svg", "finding_rates.svg"):
            assert (outdir / name).read_text().lstrip().startswith("<?xml")

    def test_region_filter(self, tmp_path, simple_csv):
        outdir = tmp_path / "out"

        argv = ["diagnose", "--input", str(simple_csv), "--outdir", str(outdir), "--region", "Osaka"]
        code = main([*argv, "--no-charts"])

        frame = pd.read_csv(outdir / "diagnostics.csv")
        assert code == ExitCode.OK
        assert set(frame["region"]) == {"Osaka"}
        assert not (outdir / "tightness.svg").exists()

    def test_unknown_region(self, tmp_path, simple_csv):
        code = main(["diagnose", "--input", str(simple_csv), "--outdir", str(tmp_path), "--region", "Nagoya"])
        assert code == ExitCode.ESTIMATION


class TestEstimate:
    def test_single_region(self, tmp_path, simulated):
        outdir = tmp_path / "est"

        assert main(["estimate", "--input", str(simulated), "--outdir", str(outdir), *SMALL_GRID]) == ExitCode.OK

        efficiency = pd.read_csv(outdir / "efficiency.csv")
        elasticity = pd.read_csv(outdir / "elasticity.csv")
        assert list(efficiency.columns) == ["period", "region", "efficiency", "efficiency_index", "support_flag"]
        assert len(efficiency) == len(elasticity) == 120
        assert set(efficiency["support_flag"]) <= {"in", "clamped", "out"}

        defined = efficiency[efficiency["efficiency"] > 0]
        assert defined["efficiency_index"].iloc[0] == 1.0
        assert (outdir / "efficiency.svg").exists() and (outdir / "elasticity.svg").exists()

        echo = json.loads((outdir / "resolved_config.json").read_text())
        assert echo["bandwidth"] == 0.1 and echo["grid_psi"] == 30

    def test_explicit_baseline(self, tmp_path, simulated):
        first = tmp_path / "first"
        main(["estimate", "--input", str(simulated), "--outdir", str(first), "--no-charts", *SMALL_GRID])
        efficiency = pd.read_csv(first / "efficiency.csv")
        baseline = efficiency[efficiency["support_flag"] == "in"]["period"].iloc[1]

        second = tmp_path / "second"
        argv = ["estimate", "--input", str(simulated), "--outdir", str(second), "--no-charts", "--baseline", baseline]
        assert main([*argv, *SMALL_GRID]) == ExitCode.OK

        rebased = pd.read_csv(second / "efficiency.csv").set_index("period")
        assert rebased.loc[baseline, "efficiency_index"] == 1.0
        assert rebased["efficiency"].equals(efficiency.set_index("period")["efficiency"])

    def test_rerun_is_byte_identical(self, tmp_path, simulated):
        first, second = tmp_path / "first", tmp_path / "second"
        main(["estimate", "--input", str(simulated), "--outdir", str(first), "--no-charts", *SMALL_GRID])
        main(["estimate", "--config", str(first / "resolved_config.json"), "--outdir", str(second)])

        for name in ("efficiency.csv", "elasticity.csv"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_regions_are_estimated_independently(self, tmp_path, three_regions, monkeypatch):
        serial = tmp_path / "serial"
        argv = ["estimate", "--input", str(three_regions), "--no-charts", *SMALL_GRID]
        assert main([*argv, "--outdir", str(serial)]) == ExitCode.OK

        monkeypatch.setenv("MATCHFN_THREADS", "3")
        reset_config_cache()
        parallel = tmp_path / "parallel"
        assert main([*argv, "--outdir", str(parallel)]) == ExitCode.OK

        frame = pd.read_csv(serial / "efficiency.csv")
        assert list(pd.unique(frame["region"])) == ["A", "B", "C"]
        assert (serial / "efficiency.csv").read_bytes() == (parallel / "efficiency.csv").read_bytes()

    def test_region_subset(self, tmp_path, three_regions):
        outdir = tmp_path / "b"
        argv = ["estimate", "--input", str(three_regions), "--outdir", str(outdir), "--region", "B", "--no-charts"]

        assert main([*argv, *SMALL_GRID]) == ExitCode.OK
        assert set(pd.read_csv(outdir / "efficiency.csv")["region"]) == {"B"}

    def test_baseline_missing_in_one_region(self, tmp_path):
        parts = []
        for region, start in (("Tokyo", "2019-12"), ("Osaka", "2020-06")):
            outdir = tmp_path / region
            argv = ["simulate", "--outdir", str(outdir), "--periods", "60", "--region", region, "--start-period", start]
            assert main(argv) == ExitCode.OK
            parts.append(pd.read_csv(outdir / "panel.csv"))
        path = tmp_path / "panel.csv"
        pd.concat(parts, ignore_index=True).to_csv(path, index=False)

        outdir = tmp_path / "est"
        argv = ["estimate", "--input", str(path), "--outdir", str(outdir), "--baseline", "2019-12", "--no-charts"]
        assert main([*argv, *SMALL_GRID]) == ExitCode.OK

        frame = pd.read_csv(outdir / "efficiency.csv")
        tokyo = frame[frame["region"] == "Tokyo"].set_index("period")
        osaka = frame[frame["region"] == "Osaka"]
        assert tokyo.loc["2019-12", "efficiency_index"] == 1.0
        assert len(osaka) == 60
        assert osaka["efficiency_index"].isna().all()
        assert osaka["efficiency"].notna().any()
