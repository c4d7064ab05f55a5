import numpy as np
import pytest

from rangevol import gbm
from rangevol.cli import main, read_config_file
from rangevol.estimators import EstimatorKind, VolParams, compute_all
from rangevol.market_data import OhlcSeries, load_csv

FAST = ["--epochs", "3", "--patience", "2", "--hidden", "4"]
TICKERS = ("AAA", "BBB", "CCC")


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert main(["simulate", "--out", str(d), "--tickers", ",".join(TICKERS),
                 "--days", "320", "--steps", "20", "--regime-vol"]) == 0
    return d


@pytest.fixture(scope="module")
def full_run(data_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("full")
    assert main(["run", "--data-dir", str(data_dir), "--out", str(out)] + FAST) == 0
    return out


def test_single_run_contract(data_dir, tmp_path):
    out = tmp_path / "one"
    code = main(["run", "--data-dir", str(data_dir), "--tickers", "AAA", "--estimators", "yz",
                 "--out", str(out)] + FAST)
    assert code == 0
    run = out / "runs" / "AAA" / "yang_zhang"
    for name in ("model.txt", "loss_curve.csv", "metrics.csv", "predictions.csv"):
        assert (run / name).is_file()
    for regime in ("default", "lowered", "confident"):
        assert (out / "tables" / f"metrics_{regime}.csv").is_file()
        assert (out / "tables" / f"metrics_{regime}.txt").is_file()


def test_table_shape(full_run):
    lines = (full_run / "tables" / "metrics_default.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert len(lines) == 1 + 5
    assert header[1:9] == [f"{m}_{s}" for m in ("accuracy", "precision", "recall", "f1") for s in ("mean", "std")]
    assert [ln.split(",")[0] for ln in lines[1:]] == [
        "close_to_close", "garman_klass", "parkinson", "rogers_satchell", "yang_zhang"]
    assert all(ln.split(",")[-1] == str(len(TICKERS)) for ln in lines[1:])
    corr = (full_run / "tables" / "correlations.csv").read_text().splitlines()
    assert len(corr) == 6


def test_manifest_files_exist(full_run):
    listed = (full_run / "manifest.txt").read_text().split()
    assert "tables/keep_ratios.csv" in listed and "runs/AAA/vol_parkinson.csv" in listed
    assert all((full_run / f).is_file() for f in listed)


def test_report_over_partial_roots_matches_monolithic(data_dir, full_run, tmp_path):
    roots = []
    for t in TICKERS:
        root = tmp_path / f"part_{t}"
        assert main(["run", "--data-dir", str(data_dir), "--tickers", t, "--out", str(root)] + FAST) == 0
        roots.append(str(root))
    merged = tmp_path / "merged"
    assert main(["report", *roots, "--out", str(merged)]) == 0
    for f in sorted((full_run / "tables").iterdir()):
        assert (merged / "tables" / f.name).read_bytes() == f.read_bytes(), f.name


def test_report_rejects_duplicate_runs(full_run, tmp_path):
    assert main(["report", str(full_run), str(full_run), "--out", str(tmp_path)]) == 1


def test_parallel_run_matches_serial(data_dir, full_run, tmp_path):
    out = tmp_path / "par"
    assert main(["run", "--data-dir", str(data_dir), "--out", str(out), "--jobs", "2"] + FAST) == 0
    for f in (full_run / "manifest.txt").read_text().split():
        assert (out / f).read_bytes() == (full_run / f).read_bytes(), f


def test_train_and_evaluate(data_dir, full_run, tmp_path, capsys):
    out = tmp_path / "single"
    args = ["--data-dir", str(data_dir), "--ticker", "BBB", "--estimator", "gk", "--out", str(out)] + FAST
    assert main(["train"] + args) == 0
    trained = capsys.readouterr().out
    run = out / "runs" / "BBB" / "garman_klass"
    # same seed derivation as inside a full run
    assert (run / "model.txt").read_bytes() == (full_run / "runs/BBB/garman_klass/model.txt").read_bytes()
    assert main(["evaluate"] + args) == 0
    assert capsys.readouterr().out == trained == (run / "metrics.csv").read_text()


def test_estimate_constant_prices(tmp_path):
    n = 40
    dates = np.busday_offset(np.datetime64("2009-01-02"), np.arange(n), roll="forward")
    flat = np.full(n, 50.0)
    (tmp_path / "d").mkdir()
    OhlcSeries("FLAT", dates, flat, flat, flat, flat).to_csv(tmp_path / "d" / "FLAT.csv")
    assert main(["estimate", "--data-dir", str(tmp_path / "d"), "--out", str(tmp_path / "o")]) == 0
    files = sorted((tmp_path / "o" / "FLAT").glob("vol_*.csv"))
    assert len(files) == 5
    for f in files:
        sig = [float(ln.split(",")[1]) for ln in f.read_text().splitlines()[1:]]
        assert len(sig) == n - 21 and all(v == 0.0 for v in sig)


def test_simulate_estimate_round_trip(tmp_path):
    d, o = tmp_path / "d", tmp_path / "o"
    assert main(["simulate", "--out", str(d), "--tickers", "SIM", "--days", "60", "--steps", "15", "--seed", "3"]) == 0
    assert main(["estimate", "--data-dir", str(d), "--out", str(o), "--estimators", "p,rs"]) == 0
    direct = gbm.simulate(gbm.GbmConfig(steps_per_day=15, days=60, seed=3000), ticker="SIM")
    assert load_csv(d / "SIM.csv") == direct
    want = compute_all(direct, VolParams(21, 252.0), [EstimatorKind.PARKINSON, EstimatorKind.ROGERS_SATCHELL])
    for kind, v in want.items():
        got = [float(ln.split(",")[1]) for ln in (o / "SIM" / f"vol_{kind.value}.csv").read_text().splitlines()[1:]]
        assert got == v.sigma.tolist()


def test_unknown_flag_and_subcommand(capsys):
    with pytest.raises(SystemExit) as e:
        main(["run", "--bogus"])
    assert e.value.code != 0
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code != 0
    assert "usage" in capsys.readouterr().err


def test_config_file_and_override(tmp_path, data_dir):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(f"data_dir = {data_dir}\n# comment\nepochs = 2\npatience = 1\nhidden = 3\n"
                   "tickers = AAA\nestimators = cc\n")
    values = read_config_file(cfg)
    assert values["epochs"] == 2 and values["hidden"] == (3,)
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--epochs", "1", "--out", str(out)]) == 0
    loss = (out / "runs" / "AAA" / "close_to_close" / "loss_curve.csv").read_text().splitlines()
    assert len(loss) == 2  # flag wins over the file
    (tmp_path / "bad.cfg").write_text("nonsense = 1\n")
    assert main(["run", "--config", str(tmp_path / "bad.cfg")]) == 1


def test_partial_failure_exit_code(tmp_path, data_dir):
    d = tmp_path / "d"
    d.mkdir()
    (d / "AAA.csv").write_bytes((data_dir / "AAA.csv").read_bytes())
    gbm.simulate(gbm.GbmConfig(days=30, steps_per_day=5), ticker="TINY").to_csv(d / "TINY.csv")
    out = tmp_path / "o"
    assert main(["run", "--data-dir", str(d), "--estimators", "p", "--out", str(out)] + FAST) == 2
    assert "TINY,parkinson" in (out / "failures.txt").read_text()
    only_bad = tmp_path / "bad"
    only_bad.mkdir()
    (only_bad / "TINY.csv").write_bytes((d / "TINY.csv").read_bytes())
    assert main(["run", "--data-dir", str(only_bad), "--out", str(tmp_path / "o2")] + FAST) == 1
