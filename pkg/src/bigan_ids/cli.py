"""Command-line entry point: ``bigan-ids <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 training/runtime fault.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import tomli

from . import divergence, kdd
from .evaluate import (
    RunManifest,
    benchmark,
    compute_metrics,
    contamination_sweep,
    file_digest,
    read_scores_csv,
    write_metrics_csv,
    write_scores_csv,
    write_sweep_csv,
)
from .model import load_checkpoint, save_checkpoint
from .scorer import ThresholdRule, apply_threshold, calibrate_threshold, score_batch
from .trainer import TrainConfig, train

log = logging.getLogger("bigan_ids")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
DATA_DEFAULTS = {"contamination": 0.2, "dummy": False, "swap_labels": True, "test_size": None}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- config -----------------------------------------------------------------------

def load_config(path) -> tuple[TrainConfig, dict]:
    """Read a TOML config or a previous run's manifest.

    TOML: training keys at top level (or under ``[train]``), split options
    under ``[data]``.
    """
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        if path.suffix == ".json":
            man = RunManifest.load(path)
            train_d, data_d = dict(man.config), dict(man.data)
            data_d = {k: v for k, v in data_d.items() if k in DATA_DEFAULTS}
        else:
            raw = tomli.loads(path.read_text())
            data_d = raw.pop("data", {})
            train_d = raw.pop("train", {})
            train_d.update(raw)
        unknown = set(data_d) - set(DATA_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown [data] keys: {sorted(unknown)}")
        return TrainConfig.from_dict(train_d), {**DATA_DEFAULTS, **data_d}
    except (ValueError, TypeError, tomli.TOMLDecodeError) as exc:
        raise UsageError(f"malformed config {path}: {exc}") from exc


def _parse_rule(text: str) -> ThresholdRule:
    try:
        return ThresholdRule.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _need_file(path, what) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {p}")
    return p


def _load_records(path, swap: bool):
    try:
        records = kdd.read_kdd(path)
    except kdd.KddParseError as exc:
        raise DataError(str(exc)) from exc
    if not records:
        raise DataError(f"no records in {path}")
    return kdd.assign_classes(records, swap)


class _Run:
    """Files of one run directory."""

    def __init__(self, root):
        self.root = Path(root)
        self.manifest = self.root / "manifest.json"
        self.checkpoint = self.root / "checkpoint.json"
        self.schema = self.root / "schema.json"
        self.history = self.root / "history.csv"
        self.split = self.root / "split.json"
        self.scores = self.root / "scores.csv"
        self.metrics = self.root / "metrics.csv"
        self.sweep = self.root / "sweep.csv"
        self.bench = self.root / "bench.json"

    def require(self):
        for p in (self.manifest, self.checkpoint, self.schema, self.split):
            _need_file(p, "run file")
        return self

    def load_manifest(self) -> RunManifest:
        try:
            return RunManifest.load(self.manifest)
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"malformed manifest {self.manifest}: {exc}") from exc


def _encoded_subset(run: _Run, man: RunManifest, data_path, which: str):
    data_path = _need_file(data_path or man.data["path"], "data file")
    if file_digest(data_path) != man.data["digest"]:
        log.warning("data file %s differs from the one recorded in the manifest", data_path)
    records = _load_records(data_path, man.data.get("swap_labels", True))
    split = json.loads(run.split.read_text())
    if which == "all":
        idx = np.arange(len(records))
    else:
        idx = np.asarray(split[which], dtype=int)
        if len(idx) and idx.max() >= len(records):
            raise DataError(f"split indices do not fit {data_path}; was the file changed?")
    schema = kdd.EncodingSchema.load(run.schema)
    chosen = [records[i] for i in idx]
    try:
        X, y = kdd.encode_many(chosen, schema)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    return X, y, idx


# -- subcommands ------------------------------------------------------------------

def cmd_train(args) -> int:
    cfg, data_opts = load_config(args.config) if args.config else (TrainConfig(), dict(DATA_DEFAULTS))
    overrides = {k: getattr(args, k) for k in ("seed", "epochs", "objective", "checkpoint_every")
                 if getattr(args, k) is not None}
    if overrides:
        try:
            cfg = TrainConfig.from_dict({**cfg.to_dict(), **overrides})
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if args.contamination is not None:
        data_opts["contamination"] = args.contamination
    if args.dummy:
        data_opts["dummy"] = True
    if args.no_swap:
        data_opts["swap_labels"] = False

    data_path = _need_file(args.data, "data file")
    run = _Run(args.out)
    run.root.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    records = _load_records(data_path, data_opts["swap_labels"])
    try:
        sp = kdd.split(records, cfg.seed, data_opts["contamination"], data_opts["test_size"])
        if not sp.train:
            raise DataError("the training half contains no normal-class records")
        schema = kdd.fit_schema(sp.train, dummy=data_opts["dummy"])
        X_train, _ = kdd.encode_many(sp.train, schema)
    except (kdd.InsufficientDataError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    t_data = time.perf_counter() - t0
    schema.save(run.schema)
    run.split.write_text(json.dumps({
        "train": sp.train_index.tolist(), "test": sp.test_index.tolist(), "pool": sp.pool_index.tolist(),
    }))
    log.info("training on %d normal records, encoded width %d", len(X_train), schema.width)

    def snapshot(epoch, model):
        if cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(model, run.root / f"checkpoint_epoch{epoch + 1}.json")

    t1 = time.perf_counter()
    model, history = train(cfg, X_train, on_epoch=snapshot)
    t_train = time.perf_counter() - t1
    save_checkpoint(model, run.checkpoint)
    history.to_csv(run.history)
    RunManifest(
        config=cfg.to_dict(),
        data={"path": str(data_path.resolve()), "digest": file_digest(data_path), **data_opts,
              "n_records": len(records), "n_train": len(sp.train), "n_test": len(sp.test),
              "encoded_width": schema.width},
        seed=cfg.seed,
        checkpoint=str(run.checkpoint.name),
        timings={"data_s": t_data, "train_s": t_train},
    ).save(run.manifest)
    print(f"trained {cfg.epochs} epochs in {t_train:.1f}s -> {run.checkpoint}")
    return EXIT_OK


def cmd_score(args) -> int:
    run = _Run(args.run).require()
    man = run.load_manifest()
    model = load_checkpoint(run.checkpoint)
    X, y, idx = _encoded_subset(run, man, args.data, "all" if args.all else "test")
    lam = man.config["lambda_weights"]
    reports = score_batch(model, X, lam, sample_ids=idx)
    verdicts = apply_threshold(reports, _parse_rule(args.rule)) if args.rule else None
    out = Path(args.out) if args.out else run.scores
    write_scores_csv(out, reports, verdicts, y)
    print(f"scored {len(reports)} samples -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    run = _Run(args.run)
    scores_path = _need_file(args.scores or run.scores, "scores file")
    reports, _, truths = read_scores_csv(scores_path)
    if truths is None:
        raise DataError("scores file carries no ground truth; cannot evaluate")
    if args.rule == "calibrate":
        rule = ThresholdRule.fixed(calibrate_threshold(reports, truths))
    else:
        rule = _parse_rule(args.rule)
    verdicts = apply_threshold(reports, rule)
    metrics = compute_metrics(verdicts, truths)
    out = Path(args.out) if args.out else run.metrics
    write_metrics_csv(out, [(str(rule), metrics)])
    write_scores_csv(scores_path, reports, verdicts, truths)
    if run.manifest.is_file():
        man = run.load_manifest()
        man.metrics[str(rule)] = {"precision": metrics.precision, "recall": metrics.recall, "f1": metrics.f1}
        man.save(run.manifest)
    print(f"{rule}: precision={metrics.precision:.4f} recall={metrics.recall:.4f} f1={metrics.f1:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    run = _Run(args.run).require()
    man = run.load_manifest()
    model = load_checkpoint(run.checkpoint)
    X, y, _ = _encoded_subset(run, man, args.data, "pool")
    try:
        rows = contamination_sweep(model, X, y, args.rates, man.seed, man.config["lambda_weights"])
    except kdd.InsufficientDataError as exc:
        raise DataError(str(exc)) from exc
    out = Path(args.out) if args.out else run.sweep
    write_sweep_csv(out, rows)
    for r in rows:
        print(f"c={r.rate:<5} n={r.n_test:<6} anomalies={r.n_anomalous:<5} "
              f"P={r.metrics.precision:.4f} R={r.metrics.recall:.4f} F1={r.metrics.f1:.4f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    run = _Run(args.run).require()
    man = run.load_manifest()
    model = load_checkpoint(run.checkpoint)
    X, _, _ = _encoded_subset(run, man, args.data, "test")
    if len(X) == 0:
        raise DataError("empty test set")
    batch = X[: args.batch_size]
    rep = benchmark(model, batch, args.repetitions, args.search_steps, args.search_repetitions,
                    args.step_size, args.warmup, man.seed, man.config["lambda_weights"])
    out = Path(args.out) if args.out else run.bench
    out.write_text(json.dumps(rep.to_dict(), indent=1))
    man.timings["bench"] = rep.to_dict()
    man.notes["bench_protocol"] = (
        f"{rep.repetitions} timed batches of {rep.batch_size} after {rep.warmup} warm-up batches; "
        f"latent search {rep.search_steps} steps x {rep.search_repetitions} batches"
    )
    man.save(run.manifest)
    print(f"encoder path {rep.encoder_mean_s * 1e3:.3f} ms/batch, latent search "
          f"{rep.search_mean_s * 1e3:.1f} ms/batch, speedup {rep.speedup:.0f}x")
    return EXIT_OK


def cmd_divergence_demo(args) -> int:
    rows = divergence.saturation_sweep(args.separations)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        fh.write("separation,js,wasserstein1\n")
        for theta, j, w in rows:
            fh.write(f"{theta!r},{j!r},{w!r}\n")
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bigan-ids", description="BiGAN intrusion detector with a Wasserstein critic.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="fit a model on the normal records of a KDD-format file")
    t.add_argument("--config", help="TOML config or a previous run's manifest.json")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="run directory")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--objective", choices=["wasserstein", "classical"])
    t.add_argument("--contamination", type=float, help="test-split contamination rate")
    t.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    t.add_argument("--dummy", action="store_true", help="dummy coding instead of one-hot")
    t.add_argument("--no-swap", action="store_true", help="keep KDD's own normal/attack classes")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("score", help="write per-sample score reports")
    s.add_argument("--run", required=True)
    s.add_argument("--data", help="defaults to the file recorded in the manifest")
    s.add_argument("--all", action="store_true", help="score every record, not just the test split")
    s.add_argument("--rule", help="optional verdict rule, e.g. contamination:0.2")
    s.add_argument("--out")
    s.set_defaults(func=cmd_score)

    e = sub.add_parser("eval", help="apply a threshold rule to scores and write metrics")
    e.add_argument("--run", required=True)
    e.add_argument("--rule", required=True, help="contamination:C, fixed:TAU or calibrate")
    e.add_argument("--scores")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    w = sub.add_parser("sweep", help="metrics across contamination rates")
    w.add_argument("--run", required=True)
    w.add_argument("--data")
    w.add_argument("--rates", type=_float_list, default=[0.2, 0.1, 0.05, 0.01])
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bench", help="time encoder-path scoring against latent search")
    b.add_argument("--run", required=True)
    b.add_argument("--data")
    b.add_argument("--batch-size", type=int, default=50)
    b.add_argument("--repetitions", type=int, default=100)
    b.add_argument("--search-repetitions", type=int, default=None)
    b.add_argument("--search-steps", type=int, default=500)
    b.add_argument("--step-size", type=float, default=1e-3)
    b.add_argument("--warmup", type=int, default=2)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("divergence-demo", help="JS vs W1 between separating point masses")
    d.add_argument("--separations", type=_float_list,
                   default=[round(0.1 * k, 1) for k in range(21)])
    d.add_argument("--out")
    d.set_defaults(func=cmd_divergence_demo)
    return p


def main(argv=None) -> int:
    from .scorer import DegenerateModelError
    from .tensor import TrainingFault

    stage = "arguments"
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        stage = args.command
        return args.func(args)
    except UsageError as exc:
        print(f"usage error [{stage}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, kdd.KddParseError, kdd.InsufficientDataError) as exc:
        print(f"data error [{stage}]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingFault, DegenerateModelError, FloatingPointError, RuntimeError, ValueError) as exc:
        print(f"runtime fault [{stage}]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
