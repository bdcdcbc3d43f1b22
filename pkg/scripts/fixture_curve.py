"""Train on the synthetic fixture and print test F1 at c = 0.2 as training progresses."""
import argparse
from pathlib import Path

import numpy as np

from bigan_ids import kdd
from bigan_ids.evaluate import compute_metrics
from bigan_ids.scorer import ThresholdRule, apply_threshold, score_batch
from bigan_ids.trainer import TrainConfig, train

FIXTURE = Path(__file__).resolve().parent.parent / "fixtures" / "synthetic_kdd_2000.csv"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", default=str(FIXTURE))
    ap.add_argument("--epochs", type=int, default=TrainConfig().epochs)
    ap.add_argument("--every", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--contamination", type=float, default=0.2)
    args = ap.parse_args()

    cfg = TrainConfig(epochs=args.epochs, seed=args.seed)
    records = kdd.assign_classes(kdd.read_kdd(args.data))
    sp = kdd.split(records, cfg.seed, args.contamination)
    schema = kdd.fit_schema(sp.train)
    X_train, _ = kdd.encode_many(sp.train, schema)
    X_test, y_test = kdd.encode_many(sp.test, schema)
    print(f"train {X_train.shape}, test {len(X_test)} with {int(y_test.sum())} anomalous")
    rule = ThresholdRule.contamination(args.contamination)

    def report(epoch, model):
        if (epoch + 1) % args.every:
            return
        reports = score_batch(model, X_test, check_degenerate=False)
        m = compute_metrics(apply_threshold(reports, rule), y_test)
        res = np.array([r.residual for r in reports])
        print(f"epoch {epoch + 1:5d}  F1 {m.f1:.3f}  P {m.precision:.3f}  R {m.recall:.3f}  "
              f"L_R normal {res[~y_test].mean():.2f} anomalous {res[y_test].mean():.2f}", flush=True)

    train(cfg, X_train, on_epoch=report)


if __name__ == "__main__":
    main()
