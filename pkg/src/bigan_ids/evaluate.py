"""Detection metrics, contamination sweeps, timing benchmarks and run manifests."""
from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kdd
from .scorer import DEFAULT_LAMBDAS, ScoreReport, ThresholdRule, anogan_search, apply_threshold, score_batch
from .tensor import ShapeError, make_rng

MANIFEST_VERSION = 1
METRIC_FIELDS = ["tp", "fp", "fn", "tn", "precision", "recall", "f1", "degenerate"]


@dataclass
class EvalMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    degenerate: tuple[str, ...] = ()

    def row(self) -> list:
        return [self.tp, self.fp, self.fn, self.tn, repr(self.precision), repr(self.recall),
                repr(self.f1), ";".join(self.degenerate)]

    @classmethod
    def from_row(cls, d: dict) -> "EvalMetrics":
        deg = tuple(v for v in d["degenerate"].split(";") if v)
        return cls(int(d["tp"]), int(d["fp"]), int(d["fn"]), int(d["tn"]),
                   float(d["precision"]), float(d["recall"]), float(d["f1"]), deg)


def compute_metrics(verdicts, truths) -> EvalMetrics:
    """Confusion counts with anomalous as the positive class.

    A ratio whose denominator is zero is reported as 0 and named in
    ``degenerate``.
    """
    v = np.asarray(verdicts, dtype=bool)
    t = np.asarray(truths, dtype=bool)
    if v.shape != t.shape:
        raise ShapeError(f"{v.size} verdicts for {t.size} truths")
    tp = int(np.sum(v & t))
    fp = int(np.sum(v & ~t))
    fn = int(np.sum(~v & t))
    tn = int(np.sum(~v & ~t))
    degenerate = []
    if tp + fp:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        degenerate.append("precision")
    if tp + fn:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        degenerate.append("recall")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        degenerate.append("f1")
    return EvalMetrics(tp, fp, fn, tn, precision, recall, f1, tuple(degenerate))


def write_metrics_csv(path, rows: list[tuple[str, EvalMetrics]], key="rule") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([key, *METRIC_FIELDS])
        for name, m in rows:
            w.writerow([name, *m.row()])


def read_metrics_csv(path, key="rule") -> list[tuple[str, EvalMetrics]]:
    with open(path, newline="") as fh:
        return [(r[key], EvalMetrics.from_row(r)) for r in csv.DictReader(fh)]


# -- score reports on disk ------------------------------------------------------

def write_scores_csv(path, reports: list[ScoreReport], verdicts=None, truths=None) -> None:
    n_taps = len(reports[0].discrimination) if reports else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "residual", *[f"L_D{i + 1}" for i in range(n_taps)],
                    "score", "verdict", "truth", "lambdas"])
        for i, r in enumerate(reports):
            verdict = "" if verdicts is None else (kdd.ANOMALOUS if verdicts[i] else kdd.NORMAL)
            truth = "" if truths is None else (kdd.ANOMALOUS if truths[i] else kdd.NORMAL)
            w.writerow([r.sample_id, repr(r.residual), *[repr(d) for d in r.discrimination],
                        repr(r.score), verdict, truth, ";".join(repr(v) for v in r.lambdas)])


def read_scores_csv(path):
    """Returns ``(reports, verdicts, truths)``; the latter two are None when absent."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        taps = [c for c in reader.fieldnames if c.startswith("L_D")]
        rows = list(reader)
    reports, verdicts, truths = [], [], []
    for r in rows:
        lam = tuple(float(v) for v in r["lambdas"].split(";") if v)
        reports.append(ScoreReport(int(r["sample_id"]), float(r["residual"]),
                                   tuple(float(r[c]) for c in taps), float(r["score"]), lam))
        verdicts.append(r["verdict"] == kdd.ANOMALOUS if r["verdict"] else None)
        truths.append(r["truth"] == kdd.ANOMALOUS if r["truth"] else None)
    if any(v is None for v in verdicts):
        verdicts = None
    if any(t is None for t in truths):
        truths = None
    return reports, verdicts, truths


# -- contamination sweep --------------------------------------------------------

@dataclass
class SweepRow:
    rate: float
    n_test: int
    n_anomalous: int
    metrics: EvalMetrics


def contamination_sweep(model, X_pool, y_pool, rates=(0.2, 0.1, 0.05, 0.01), seed: int = 0,
                        lambdas=DEFAULT_LAMBDAS, test_size: int | None = None) -> list[SweepRow]:
    """Score a test set composed at each rate and flag its top ``rate`` fraction."""
    X_pool = np.asarray(X_pool, dtype=np.float64)
    reports = score_batch(model, X_pool, lambdas, check_degenerate=False)
    return sweep_reports(reports, y_pool, rates, seed, test_size)


def sweep_reports(reports, y_pool, rates, seed: int = 0, test_size: int | None = None) -> list[SweepRow]:
    """Sweep over already-scored pool samples; ``reports[i]`` belongs to pool position i."""
    y_pool = np.asarray(y_pool, dtype=bool)
    if len(reports) != len(y_pool):
        raise ShapeError("one report per pool sample required")
    rows = []
    for c in rates:
        idx = kdd.compose_test_set(y_pool, seed, c, test_size)
        verdicts = apply_threshold([reports[i] for i in idx], ThresholdRule.contamination(c))
        rows.append(SweepRow(float(c), len(idx), int(y_pool[idx].sum()),
                             compute_metrics(verdicts, y_pool[idx])))
    return rows


def write_sweep_csv(path, rows: list[SweepRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rate", "n_test", "n_anomalous", *METRIC_FIELDS])
        for r in rows:
            w.writerow([repr(r.rate), r.n_test, r.n_anomalous, *r.metrics.row()])


def read_sweep_csv(path) -> list[SweepRow]:
    with open(path, newline="") as fh:
        return [SweepRow(float(r["rate"]), int(r["n_test"]), int(r["n_anomalous"]), EvalMetrics.from_row(r))
                for r in csv.DictReader(fh)]


# -- timing -----------------------------------------------------------------------

@dataclass
class TimingReport:
    batch_size: int
    repetitions: int
    search_repetitions: int
    search_steps: int
    warmup: int
    encoder_mean_s: float
    encoder_std_s: float
    search_mean_s: float
    search_std_s: float

    @property
    def speedup(self) -> float:
        return self.search_mean_s / self.encoder_mean_s

    def to_dict(self) -> dict:
        d = asdict(self)
        d["speedup"] = self.speedup
        return d


def _time_calls(fn, n, warmup):
    for _ in range(warmup):
        fn()
    out = np.empty(n)
    for i in range(n):
        t0 = time.perf_counter()
        fn()
        out[i] = time.perf_counter() - t0
    return out


def benchmark(model, batch, repetitions: int = 100, search_steps: int = 500,
              search_repetitions: int | None = None, step_size: float = 1e-3,
              warmup: int = 2, seed: int = 0, lambdas=DEFAULT_LAMBDAS) -> TimingReport:
    """Per-batch wall clock of single-pass scoring against iterative latent search."""
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    search_repetitions = repetitions if search_repetitions is None else search_repetitions
    rng = make_rng(seed)
    enc = _time_calls(lambda: score_batch(model, batch, lambdas, check_degenerate=False), repetitions, warmup)
    search = _time_calls(lambda: anogan_search(model, batch, search_steps, step_size, rng, lambdas),
                         search_repetitions, min(warmup, 1))
    return TimingReport(len(batch), repetitions, search_repetitions, search_steps, warmup,
                        float(enc.mean()), float(enc.std()), float(search.mean()), float(search.std()))


# -- manifests ----------------------------------------------------------------------

def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    data: dict  # path, digest and split options
    seed: int
    checkpoint: str
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    version: int = MANIFEST_VERSION

    def to_dict(self) -> dict:
        return {"format": "bigan-ids-manifest", **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        if d.get("format") != "bigan-ids-manifest":
            raise ValueError("not a run manifest")
        if d.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {d.get('version')}")
        d = {k: v for k, v in d.items() if k != "format"}
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))
