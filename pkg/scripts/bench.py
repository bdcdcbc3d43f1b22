"""Encoder-path scoring vs latent search timing at several search lengths."""
import argparse

from bigan_ids import kdd
from bigan_ids.evaluate import benchmark
from bigan_ids.model import init_model, load_checkpoint
from bigan_ids.synthetic import kdd_fixture
from bigan_ids.tensor import make_rng
from bigan_ids.trainer import TrainConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--checkpoint", help="trained model; a fresh initialisation is timed otherwise")
    ap.add_argument("--batch-size", type=int, default=50)
    ap.add_argument("--steps", type=int, nargs="+", default=[100, 250, 500])
    ap.add_argument("--repetitions", type=int, default=100)
    ap.add_argument("--search-repetitions", type=int, default=5)
    args = ap.parse_args()

    records = kdd_fixture(4 * args.batch_size, seed=3)
    schema = kdd.fit_schema(records)
    X, _ = kdd.encode_many(records, schema)
    if args.checkpoint:
        model = load_checkpoint(args.checkpoint)
    else:
        model = init_model(TrainConfig(), make_rng(0), input_dim=X.shape[1])
    if model.input_dim != X.shape[1]:
        raise SystemExit(f"checkpoint expects width {model.input_dim}, fixture encodes to {X.shape[1]}")
    batch = X[: args.batch_size]
    print("search_steps,encoder_ms,search_ms,speedup")
    for steps in args.steps:
        rep = benchmark(model, batch, args.repetitions, steps, args.search_repetitions)
        print(f"{steps},{rep.encoder_mean_s * 1e3:.3f},{rep.search_mean_s * 1e3:.1f},{rep.speedup:.0f}", flush=True)


if __name__ == "__main__":
    main()
