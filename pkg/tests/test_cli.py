import json

import pytest

from bloodbank.cli import main
from bloodbank.forecast import read_dataset_csv, read_forecast_csv
from bloodbank.inventory import read_stream_csv, read_trajectory_csv, write_stream_csv
from bloodbank.policy import read_comparison_csv, read_sweep_csv
from bloodbank.timeseries import read_decomposition_csv


def run(args):
    return main([str(a) for a in args])


def write_stream(path, values):
    write_stream_csv(path, values)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert run(["generate", "--days", 420, "--seed", 5, "--out-dir", out]) == 0
    return out / "dataset.csv"


class TestGenerate:
    def test_writes_dataset_and_manifest(self, dataset):
        run_dir = dataset.parent
        records = read_dataset_csv(dataset)
        assert len(records) == 420
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["command"] == "generate"
        assert manifest["config"]["seed"] == 5
        assert "dataset_truth.csv" in manifest["outputs"]
        assert (run_dir / "dataset_truth.csv").exists()

    def test_byte_identical_across_runs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["generate", "--days", 120, "--seed", 9, "--out-dir", out]) == 0
        assert (a / "dataset.csv").read_bytes() == (b / "dataset.csv").read_bytes()
        assert (a / "dataset_truth.csv").read_bytes() == (b / "dataset_truth.csv").read_bytes()


class TestDecompose:
    def test_writes_decomposition(self, dataset, tmp_path):
        out = tmp_path / "dec"
        assert run(["decompose", "--data", dataset, "--out-dir", out]) == 0
        dates, observed, dec = read_decomposition_csv(out / "decomposition.csv")
        assert len(dates) == 420
        recon = dec.trend + dec.seasonal + dec.residual
        assert max(abs(recon - observed)) <= 1e-9 * max(abs(observed))

    def test_missing_file_fails_cleanly(self, tmp_path, capsys):
        assert run(["decompose", "--data", tmp_path / "nope.csv"]) == 2
        assert "error:" in capsys.readouterr().err


@pytest.fixture(scope="module")
def trained(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    code = run([
        "train", "--data", dataset, "--train-days", 350,
        "--rounds", 40, "--seed", 3, "--out-dir", out,
    ])
    assert code == 0
    return out


class TestTrainForecast:
    def test_model_and_reports_written(self, trained):
        assert (trained / "model.json").exists()
        report = read_forecast_csv(trained / "train_report.csv")
        assert len(report.dates) == 350
        holdout = read_forecast_csv(trained / "holdout_report.csv")
        assert len(holdout.dates) == 70
        metrics = (trained / "metrics.csv").read_text().splitlines()
        assert metrics[0] == "metric,value"
        assert metrics[1].startswith("rmse,")

    def test_forecast_horizon(self, trained, dataset, tmp_path):
        out = tmp_path / "fc"
        code = run(["forecast", "--model", trained / "model.json", "--data", dataset,
                    "--horizon", 30, "--out-dir", out])
        assert code == 0
        report = read_forecast_csv(out / "forecast.csv")
        assert len(report.dates) == 30

    def test_zero_horizon_empty_report(self, trained, dataset, tmp_path):
        out = tmp_path / "fc0"
        code = run(["forecast", "--model", trained / "model.json", "--data", dataset,
                    "--horizon", 0, "--out-dir", out])
        assert code == 0
        report = read_forecast_csv(out / "forecast.csv")
        assert report.dates == []

    def test_horizon_beyond_data_fails(self, trained, dataset, tmp_path, capsys):
        code = run(["forecast", "--model", trained / "model.json", "--data", dataset,
                    "--horizon", 400, "--out-dir", tmp_path / "fcx"])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_train_days_validated(self, dataset, tmp_path, capsys):
        code = run(["train", "--data", dataset, "--train-days", 9999,
                    "--out-dir", tmp_path / "bad"])
        assert code == 2
        assert "train_days" in capsys.readouterr().err


class TestSimulate:
    def test_trajectory_written(self, tmp_path):
        orders = tmp_path / "orders.csv"
        demands = tmp_path / "demands.csv"
        write_stream(orders, [93] * 60)
        write_stream(demands, [93] * 60)
        out = tmp_path / "sim"
        code = run(["simulate", "--orders", orders, "--demands", demands,
                    "--initial", 780, "--out-dir", out])
        assert code == 0
        outcomes = read_trajectory_csv(out / "trajectory.csv")
        assert len(outcomes) == 60
        assert all(o.end_inventory == 780 for o in outcomes)
        assert all(o.cost == 880.0 for o in outcomes)

    def test_mismatched_streams_name_both_lengths(self, tmp_path, capsys):
        orders = tmp_path / "orders.csv"
        demands = tmp_path / "demands.csv"
        write_stream(orders, [5] * 5)
        write_stream(demands, [5] * 7)
        code = run(["simulate", "--orders", orders, "--demands", demands,
                    "--out-dir", tmp_path / "sim"])
        assert code == 2
        err = capsys.readouterr().err
        assert "5" in err and "7" in err


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    gen = root / "gen"
    assert run(["generate", "--days", 500, "--seed", 11, "--out-dir", gen]) == 0
    train_dir = root / "train"
    assert run(["train", "--data", gen / "dataset.csv", "--train-days", 365,
                "--rounds", 40, "--out-dir", train_dir]) == 0
    return root, gen, train_dir


class TestOptimizeCompare:
    def test_optimize_then_compare(self, pipeline):
        root, gen, train_dir = pipeline
        opt = root / "opt"
        code = run(["optimize", "--report", train_dir / "train_report.csv",
                    "--initial", 780, "--target-grid", "780:1560:60",
                    "--reorder-grid", "0:1560:60", "--out-dir", opt])
        assert code == 0
        doc = json.loads((opt / "policy.json").read_text())
        assert doc["format"] == "bloodbank.policy"
        assert 0 <= doc["reorder_daily"] <= doc["inventory_target"]
        sweep = read_sweep_csv(opt / "target_sweep.csv")
        assert any(target == doc["inventory_target"] for target, _, _ in sweep)
        assert read_sweep_csv(opt / "reorder_sweep_semiweekly.csv")

        cmp_dir = root / "cmp"
        code = run(["compare", "--report", train_dir / "holdout_report.csv",
                    "--policy", opt / "policy.json", "--initial", 780,
                    "--out-dir", cmp_dir])
        assert code == 0
        table = read_comparison_csv(cmp_dir / "comparison.csv")
        assert set(table) == {"baseline", "gold", "daily", "semiweekly"}
        text = (cmp_dir / "comparison.txt").read_text()
        assert "semiweekly" in text and "days with orders" in text

    def test_compare_flags_without_policy_file(self, pipeline, tmp_path):
        root, gen, train_dir = pipeline
        out = tmp_path / "cmp2"
        code = run(["compare", "--report", train_dir / "holdout_report.csv",
                    "--target", 1200, "--reorder-daily", 800,
                    "--reorder-semiweekly", 900, "--initial", 780, "--out-dir", out])
        assert code == 0

    def test_compare_requires_policy_or_flags(self, pipeline, tmp_path, capsys):
        root, gen, train_dir = pipeline
        code = run(["compare", "--report", train_dir / "holdout_report.csv",
                    "--out-dir", tmp_path / "cmp3"])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestConfigFile:
    def test_file_fills_defaults_flags_win(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"days": 60, "seed": 123}))
        out = tmp_path / "gen"
        assert run(["generate", "--config", config, "--seed", 7, "--out-dir", out]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["days"] == 60  # from the file
        assert manifest["config"]["seed"] == 7  # flag beats file

    def test_unknown_key_rejected(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"dayz": 60}))
        assert run(["generate", "--config", config, "--out-dir", tmp_path / "x"]) == 2
        assert "dayz" in capsys.readouterr().err


def test_stream_csv_round_trip(tmp_path):
    path = tmp_path / "stream.csv"
    write_stream_csv(path, [5, 0, 93, 12])
    assert read_stream_csv(path) == [5, 0, 93, 12]


def test_output_root_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("BLOODBANK_RUNS", str(tmp_path / "root"))
    assert run(["generate", "--days", 30, "--seed", 1]) == 0
    runs = list((tmp_path / "root").iterdir())
    assert len(runs) == 1 and runs[0].name.startswith("generate-")
    assert (runs[0] / "dataset.csv").exists()


def test_manifest_hashes_inputs(tmp_path):
    gen = tmp_path / "gen"
    assert run(["generate", "--days", 120, "--seed", 2, "--out-dir", gen]) == 0
    dec = tmp_path / "dec"
    assert run(["decompose", "--data", gen / "dataset.csv", "--out-dir", dec]) == 0
    manifest = json.loads((dec / "manifest.json").read_text())
    (entry,) = manifest["inputs"].values()
    assert len(entry["sha256"]) == 64
    assert entry["bytes"] == (gen / "dataset.csv").stat().st_size
