import csv
import json

import pytest

from bigan_ids.cli import EXIT_DATA, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, load_config, main
from bigan_ids.evaluate import RunManifest, read_metrics_csv, read_scores_csv, read_sweep_csv
from bigan_ids.synthetic import write_kdd_fixture
from bigan_ids.trainer import TrainHistory


@pytest.fixture(scope="module")
def data_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "toy.csv"
    write_kdd_fixture(path, n_records=400, seed=3)
    return path


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "small.toml"
    path.write_text(
        "[train]\nepochs = 3\nseed = 4\nlatent_dim = 8\n"
        "generator_hidden = [16, 16]\nencoder_hidden = [16, 16]\ncritic_hidden = [32, 16, 8]\n"
        "[data]\ncontamination = 0.2\n"
    )
    return path


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, data_file, config_file):
    out = tmp_path_factory.mktemp("run")
    assert main(["train", "--config", str(config_file), "--data", str(data_file), "--out", str(out)]) == EXIT_OK
    return out


def test_train_writes_run_files(run_dir):
    for name in ["manifest.json", "checkpoint.json", "schema.json", "history.csv", "split.json"]:
        assert (run_dir / name).is_file()
    man = RunManifest.load(run_dir / "manifest.json")
    assert man.config["epochs"] == 3 and man.seed == 4
    assert man.data["digest"].startswith("sha256:") and man.data["contamination"] == 0.2
    assert len(TrainHistory.from_csv(run_dir / "history.csv")) == 3


def test_score_then_eval(run_dir):
    assert main(["score", "--run", str(run_dir)]) == EXIT_OK
    reports, verdicts, truths = read_scores_csv(run_dir / "scores.csv")
    split = json.loads((run_dir / "split.json").read_text())
    assert [r.sample_id for r in reports] == split["test"]
    assert verdicts is None and truths is not None
    assert main(["eval", "--run", str(run_dir), "--rule", "contamination:0.2"]) == EXIT_OK
    rows = read_metrics_csv(run_dir / "metrics.csv")
    assert rows[0][0] == "contamination:0.2"
    _, verdicts, _ = read_scores_csv(run_dir / "scores.csv")
    assert sum(verdicts) == int(0.2 * len(reports) + 0.5)
    man = RunManifest.load(run_dir / "manifest.json")
    assert man.metrics["contamination:0.2"]["f1"] == rows[0][1].f1


def test_eval_calibrate_and_fixed(run_dir, tmp_path):
    main(["score", "--run", str(run_dir), "--out", str(tmp_path / "s.csv")])
    assert main(["eval", "--run", str(run_dir), "--scores", str(tmp_path / "s.csv"),
                 "--rule", "calibrate", "--out", str(tmp_path / "m.csv")]) == EXIT_OK
    assert read_metrics_csv(tmp_path / "m.csv")[0][0].startswith("fixed:")
    assert main(["eval", "--run", str(run_dir), "--scores", str(tmp_path / "s.csv"),
                 "--rule", "fixed:1e9", "--out", str(tmp_path / "m2.csv")]) == EXIT_OK
    assert read_metrics_csv(tmp_path / "m2.csv")[0][1].tp == 0


def test_sweep_rows(run_dir):
    assert main(["sweep", "--run", str(run_dir)]) == EXIT_OK
    rows = read_sweep_csv(run_dir / "sweep.csv")
    assert [r.rate for r in rows] == [0.2, 0.1, 0.05, 0.01]
    counts = [r.n_anomalous for r in rows]
    assert counts == sorted(counts, reverse=True)


def test_bench_records_protocol(run_dir):
    assert main(["bench", "--run", str(run_dir), "--repetitions", "3", "--search-steps", "5",
                 "--warmup", "0"]) == EXIT_OK
    bench = json.loads((run_dir / "bench.json").read_text())
    assert bench["search_steps"] == 5 and bench["speedup"] > 0
    assert "bench_protocol" in RunManifest.load(run_dir / "manifest.json").notes


def test_divergence_demo(tmp_path, capsys):
    assert main(["divergence-demo", "--separations", "0,0.5,2"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "separation,js,wasserstein1"
    assert len(lines) == 4
    assert main(["divergence-demo", "--out", str(tmp_path / "d.csv")]) == EXIT_OK
    with open(tmp_path / "d.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 21 and float(rows[-1]["wasserstein1"]) == pytest.approx(2.0)


def test_manifest_works_as_config(run_dir):
    cfg, data = load_config(run_dir / "manifest.json")
    assert cfg.epochs == 3 and cfg.latent_dim == 8 and data["contamination"] == 0.2


def test_usage_errors(tmp_path, data_file, capsys):
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main(["train", "--data", str(data_file)]) == EXIT_USAGE
    assert main(["train", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "r")]) == EXIT_USAGE
    bad = tmp_path / "bad.toml"
    bad.write_text("[train]\nepochs = 'many'\nwings = 2\n")
    assert main(["train", "--config", str(bad), "--data", str(data_file), "--out", str(tmp_path / "r")]) == EXIT_USAGE
    assert main(["score", "--run", str(tmp_path / "missing")]) == EXIT_USAGE
    assert main(["eval", "--run", str(tmp_path), "--rule", "median:3"]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "usage error [train]" in err and "usage error [score]" in err


def test_data_errors(tmp_path):
    broken = tmp_path / "broken.csv"
    broken.write_text("1,2,3\n")
    assert main(["train", "--data", str(broken), "--out", str(tmp_path / "r"), "--epochs", "1"]) == EXIT_DATA
    few = tmp_path / "few.csv"
    write_kdd_fixture(few, n_records=40, anomaly_fraction=0.0, seed=1)
    assert main(["train", "--data", str(few), "--out", str(tmp_path / "r2"), "--epochs", "1",
                 "--contamination", "0.2"]) == EXIT_DATA


def test_runtime_fault_exit_code(data_file, tmp_path, monkeypatch, capsys):
    import bigan_ids.cli as cli
    from bigan_ids.tensor import TrainingFault

    def boom(*a, **k):
        raise TrainingFault("non-finite gradient", step=3)

    monkeypatch.setattr(cli, "train", boom)
    assert main(["train", "--data", str(data_file), "--out", str(tmp_path / "r"), "--epochs", "1"]) == EXIT_RUNTIME
    assert "runtime fault [train]" in capsys.readouterr().err
