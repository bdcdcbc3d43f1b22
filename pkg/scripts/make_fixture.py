"""Regenerate the synthetic KDD-format fixture used by the acceptance tests."""
import argparse
from pathlib import Path

from bigan_ids.synthetic import write_kdd_fixture


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "fixtures" / "synthetic_kdd_2000.csv"))
    ap.add_argument("--records", type=int, default=2000)
    ap.add_argument("--anomaly-fraction", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    write_kdd_fixture(args.out, n_records=args.records, anomaly_fraction=args.anomaly_fraction, seed=args.seed)
    print(f"wrote {args.records} records to {args.out}")


if __name__ == "__main__":
    main()
