import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bigan_ids.evaluate import (
    EvalMetrics,
    RunManifest,
    SweepRow,
    benchmark,
    compute_metrics,
    file_digest,
    read_metrics_csv,
    read_scores_csv,
    read_sweep_csv,
    sweep_reports,
    write_metrics_csv,
    write_scores_csv,
    write_sweep_csv,
)
from bigan_ids.model import init_model
from bigan_ids.scorer import ScoreReport, score_batch
from bigan_ids.tensor import ShapeError, make_rng
from bigan_ids.trainer import TrainConfig

from oracles import confusion_bruteforce


def test_metrics_reference_scale_example():
    # 9473 of 10000 intrusions caught with 687 false alarms
    verdicts = [True] * 9473 + [False] * 527 + [True] * 687 + [False] * 5000
    truths = [True] * 10000 + [False] * 5687
    m = compute_metrics(verdicts, truths)
    assert (m.tp, m.fn, m.fp, m.tn) == (9473, 527, 687, 5000)
    assert m.precision == pytest.approx(0.9324, abs=5e-5)
    assert m.recall == pytest.approx(0.9473, abs=5e-5)
    assert m.f1 == pytest.approx(0.9398, abs=5e-5)
    assert m.degenerate == ()


@settings(max_examples=100, deadline=None)
@given(pairs=st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=50))
def test_metrics_match_bruteforce(pairs):
    v = [a for a, _ in pairs]
    t = [b for _, b in pairs]
    m = compute_metrics(v, t)
    assert (m.tp, m.fp, m.fn, m.tn) == confusion_bruteforce(v, t)
    if m.tp:
        assert m.f1 == pytest.approx(2 * m.precision * m.recall / (m.precision + m.recall))
        assert 0 < m.f1 <= 1
    else:
        assert m.f1 == 0.0


def test_degenerate_ratios_are_named():
    m = compute_metrics([False, False], [False, False])
    assert m.precision == m.recall == m.f1 == 0.0
    assert set(m.degenerate) == {"precision", "recall", "f1"}
    m = compute_metrics([True, False], [False, False])
    assert "recall" in m.degenerate and "precision" not in m.degenerate
    with pytest.raises(ShapeError):
        compute_metrics([True], [True, False])


def test_metrics_csv_round_trip(tmp_path):
    rows = [("contamination:0.2", compute_metrics([True, False, True], [True, True, False])),
            ("fixed:1.0", compute_metrics([False], [False]))]
    write_metrics_csv(tmp_path / "m.csv", rows)
    assert read_metrics_csv(tmp_path / "m.csv") == rows


def test_scores_csv_round_trip(tmp_path):
    reports = [ScoreReport(i, 0.1 * i, (1.0 / 3, 2.0 / 7), 0.5 + i / 9, (0.1, 0.3)) for i in range(5)]
    verdicts = [True, False, False, True, False]
    truths = [True, True, False, False, False]
    write_scores_csv(tmp_path / "s.csv", reports, verdicts, truths)
    back, v, t = read_scores_csv(tmp_path / "s.csv")
    assert back == reports and v == verdicts and t == truths
    write_scores_csv(tmp_path / "s2.csv", reports)
    _, v, t = read_scores_csv(tmp_path / "s2.csv")
    assert v is None and t is None
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header == "sample_id,residual,L_D1,L_D2,score,verdict,truth,lambdas"


def test_sweep_on_separable_scores():
    # anomalies always outscore normals, so every rate gives F1 = 1
    y = np.array([False] * 300 + [True] * 100)
    reports = [ScoreReport(i, 0.0, (), 10.0 + i if y[i] else float(i % 7), ()) for i in range(400)]
    rows = sweep_reports(reports, y, [0.2, 0.1, 0.05, 0.01], seed=3)
    assert [r.rate for r in rows] == [0.2, 0.1, 0.05, 0.01]
    for r in rows:
        assert r.n_anomalous == int(np.floor(r.rate * r.n_test + 0.5))
        assert r.metrics.f1 == 1.0
    counts = [r.n_anomalous for r in rows]
    assert counts == sorted(counts, reverse=True)


def test_sweep_csv_round_trip(tmp_path):
    rows = [SweepRow(0.2, 50, 10, compute_metrics([True] * 10 + [False] * 40, [True] * 10 + [False] * 40))]
    write_sweep_csv(tmp_path / "w.csv", rows)
    assert read_sweep_csv(tmp_path / "w.csv") == rows


def test_benchmark_report_fields():
    model = init_model(TrainConfig(latent_dim=4), make_rng(0), input_dim=6)
    t = benchmark(model, make_rng(1).random((5, 6)), repetitions=3, search_steps=10, warmup=1)
    d = t.to_dict()
    assert d["batch_size"] == 5 and d["search_steps"] == 10 and d["repetitions"] == 3
    assert d["speedup"] == t.search_mean_s / t.encoder_mean_s > 0
    with pytest.raises(ValueError):
        benchmark(model, np.zeros((1, 6)), repetitions=0)


def test_manifest_round_trip_and_digest(tmp_path):
    data = tmp_path / "d.csv"
    data.write_text("a,b\n")
    m = RunManifest(TrainConfig(epochs=2).to_dict(), {"path": str(data), "digest": file_digest(data)},
                    seed=4, checkpoint="checkpoint.json", metrics={"f1": 0.5})
    m.save(tmp_path / "m.json")
    assert RunManifest.load(tmp_path / "m.json") == m
    assert file_digest(data).startswith("sha256:") and len(file_digest(data)) == 71
    with pytest.raises(ValueError):
        RunManifest.from_dict({"format": "other"})


def test_scored_batch_metrics_are_consistent():
    model = init_model(TrainConfig(latent_dim=4), make_rng(0), input_dim=6)
    X = make_rng(2).random((40, 6))
    reports = score_batch(model, X)
    y = np.arange(40) % 4 == 0
    rows = sweep_reports(reports, y, [0.25], seed=0)
    m = rows[0].metrics
    assert m.tp + m.fp + m.fn + m.tn == rows[0].n_test
    assert isinstance(m, EvalMetrics)
