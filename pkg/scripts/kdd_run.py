"""Full pipeline on the real KDD-99 10% file: train, score, sweep and benchmark.

Wraps the CLI so the run directory has the usual layout::

    python scripts/kdd_run.py --data kddcup.data_10_percent --out runs/kdd
"""
import argparse
import sys

from bigan_ids.cli import main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--data", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--config")
    ap.add_argument("--epochs", type=int)
    args = ap.parse_args()

    train = ["train", "--data", args.data, "--out", args.out]
    if args.config:
        train += ["--config", args.config]
    if args.epochs is not None:
        train += ["--epochs", str(args.epochs)]
    steps = [
        train,
        ["score", "--run", args.out],
        ["eval", "--run", args.out, "--rule", "contamination:0.2"],
        ["sweep", "--run", args.out],
        ["bench", "--run", args.out, "--search-repetitions", "5"],
    ]
    for argv in steps:
        code = cli(argv)
        if code:
            sys.exit(code)


if __name__ == "__main__":
    main()
