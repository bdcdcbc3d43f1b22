"""Adversarial training of the bidirectional GAN.

Two objectives are supported. ``wasserstein`` trains an unbounded critic to
maximise ``mean D(x, E(x)) - mean D(G(z), z)`` with weight clipping, while
generator and encoder descend the same quantity. ``classical`` squashes the
critic score through a sigmoid and plays the saturating log-loss minimax game;
it exists for the ablation comparison.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .model import BiganModel, criticize, encode, generate, init_model, joint_input
from .tensor import Mlp, Tape, TrainingFault, make_rng, rms_init, sgd_rmsprop_step

OBJECTIVES = ("wasserstein", "classical")
LOG_EPS = 1e-12


@dataclass
class TrainConfig:
    latent_dim: int = 32
    clip_bound: float = 0.01
    learning_rate: float = 5e-5
    critic_steps_per_gen_step: int = 5
    batch_size: int = 50
    epochs: int = 1000
    seed: int = 0
    objective: str = "wasserstein"
    lambda_weights: tuple[float, ...] = (0.1, 0.3)
    rms_decay: float = 0.9
    critic_dropout: float = 0.2
    generator_hidden: tuple[int, ...] = (64, 128)
    encoder_hidden: tuple[int, ...] = (128, 64)
    critic_hidden: tuple[int, ...] = (256, 128, 64)
    checkpoint_every: int = 0

    def __post_init__(self):
        self.lambda_weights = tuple(float(v) for v in self.lambda_weights)
        self.generator_hidden = tuple(int(v) for v in self.generator_hidden)
        self.encoder_hidden = tuple(int(v) for v in self.encoder_hidden)
        self.critic_hidden = tuple(int(v) for v in self.critic_hidden)
        self.validate()

    def validate(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.clip_bound <= 0:
            raise ValueError("clip_bound must be positive")
        if self.latent_dim <= 0 or self.batch_size <= 0 or self.critic_steps_per_gen_step <= 0:
            raise ValueError("latent_dim, batch_size and critic_steps_per_gen_step must be positive")
        if self.epochs < 0 or self.learning_rate < 0:
            raise ValueError("epochs and learning_rate must be nonnegative")
        lam = self.lambda_weights
        if any(v < 0 for v in lam) or sum(lam) >= 1:
            raise ValueError("lambda weights must be nonnegative and sum to less than 1")
        if any(b < a for a, b in zip(lam, lam[1:])):
            raise ValueError("lambda weights must be nondecreasing toward the critic output")

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = cls.__dataclass_fields__
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    critic_obj: float
    gen_obj: float
    seconds: float
    critic_steps: int
    gen_steps: int


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "critic_obj", "gen_obj", "seconds", "critic_steps", "gen_steps"])
            for r in self.records:
                w.writerow([r.epoch, repr(r.critic_obj), repr(r.gen_obj), repr(r.seconds),
                            r.critic_steps, r.gen_steps])

    @classmethod
    def from_csv(cls, path) -> "TrainHistory":
        import csv

        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([
            EpochRecord(int(r["epoch"]), float(r["critic_obj"]), float(r["gen_obj"]),
                        float(r["seconds"]), int(r["critic_steps"]), int(r["gen_steps"]))
            for r in rows
        ])


def sample_latent(cfg, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    if batch_size <= 0:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    return rng.standard_normal((batch_size, cfg.latent_dim))


def _sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


def critic_objective(model: BiganModel, x_batch, z_batch, mode="eval", rng=None) -> float:
    """``mean D(x, E(x)) - mean D(G(z), z)``; the critic ascends it."""
    x_batch = np.atleast_2d(x_batch)
    z_batch = np.atleast_2d(z_batch)
    if len(x_batch) != len(z_batch):
        raise ValueError("x and z batches must be the same size")
    real = criticize(model, x_batch, encode(model, x_batch, mode, rng), mode, rng).score
    fake = criticize(model, generate(model, z_batch, mode, rng), z_batch, mode, rng).score
    val = float(np.mean(real) - np.mean(fake))
    if not np.isfinite(val):
        raise TrainingFault("non-finite critic objective")
    return val


def classical_objective(model: BiganModel, x_batch, z_batch, mode="eval", rng=None) -> float:
    """``mean log D(x, E(x)) + mean log(1 - D(G(z), z))`` with ``D = sigmoid(critic)``."""
    x_batch = np.atleast_2d(x_batch)
    z_batch = np.atleast_2d(z_batch)
    if len(x_batch) != len(z_batch):
        raise ValueError("x and z batches must be the same size")
    real = criticize(model, x_batch, encode(model, x_batch, mode, rng), mode, rng).score
    fake = criticize(model, generate(model, z_batch, mode, rng), z_batch, mode, rng).score
    return float(np.mean(np.log(_sigmoid(real) + LOG_EPS)) + np.mean(np.log(1.0 - _sigmoid(fake) + LOG_EPS)))


def clip_weights(critic: Mlp, clip_bound: float) -> Mlp:
    if clip_bound <= 0:
        raise ValueError("clip_bound must be positive")
    for layer in critic.layers:
        np.clip(layer.weights, -clip_bound, clip_bound, out=layer.weights)
        np.clip(layer.bias, -clip_bound, clip_bound, out=layer.bias)
    return critic


@dataclass
class _Pass:
    """Forward pass of one objective evaluation with everything needed for gradients."""

    value: float
    real_score: np.ndarray
    fake_score: np.ndarray
    tapes: dict


def _forward(model, x, z, objective, mode, rng) -> _Pass:
    # real pairs (x, E(x)) and fake pairs (G(z), z) go through the critic as one stacked batch
    t_enc, t_gen, t_critic = Tape(), Tape(), Tape()
    ex = encode(model, x, mode, rng, t_enc)
    gz = generate(model, z, mode, rng, t_gen)
    pairs = np.concatenate([joint_input(model, x, ex), joint_input(model, gz, z)])
    scores = model.critic.forward(pairs, mode, rng, t_critic)[:, 0]
    real, fake = scores[: len(x)], scores[len(x):]
    if objective == "wasserstein":
        value = float(np.mean(real) - np.mean(fake))
    else:
        value = float(np.mean(np.log(_sigmoid(real) + LOG_EPS))
                      + np.mean(np.log(1.0 - _sigmoid(fake) + LOG_EPS)))
    return _Pass(value, real, fake, {"enc": t_enc, "gen": t_gen, "critic": t_critic})


def _score_grads(p: _Pass, objective: str):
    """d value / d critic score, real pairs stacked over fake pairs, shaped (2*batch, 1)."""
    n = len(p.real_score)
    if objective == "wasserstein":
        g_real = np.full(n, 1.0 / n)
        g_fake = np.full(n, -1.0 / n)
    else:
        sr, sf = _sigmoid(p.real_score), _sigmoid(p.fake_score)
        g_real = sr * (1.0 - sr) / (sr + LOG_EPS) / n
        g_fake = -sf * (1.0 - sf) / (1.0 - sf + LOG_EPS) / n
    return np.concatenate([g_real, g_fake])[:, None]


def critic_grads(model, x, z, objective="wasserstein", mode="eval", rng=None):
    """Objective value and gradient of the critic *loss* (= -objective)."""
    p = _forward(model, np.atleast_2d(x), np.atleast_2d(z), objective, mode, rng)
    grads, _ = model.critic.backward(p.tapes["critic"], -_score_grads(p, objective))
    return p.value, grads


def generator_encoder_grads(model, x, z, objective="wasserstein", mode="eval", rng=None):
    """Objective value and its gradients w.r.t. generator and encoder parameters."""
    p = _forward(model, np.atleast_2d(x), np.atleast_2d(z), objective, mode, rng)
    d, n = model.input_dim, len(p.real_score)
    _, gin = model.critic.backward(p.tapes["critic"], _score_grads(p, objective))
    enc_grads, _ = model.encoder.backward(p.tapes["enc"], gin[:n, d:])
    gen_grads, _ = model.generator.backward(p.tapes["gen"], gin[n:, :d])
    return p.value, gen_grads, enc_grads


StepHook = Callable[[str, int, BiganModel, np.ndarray, np.ndarray], None]


def train(cfg: TrainConfig, train_set, on_step: StepHook | None = None,
          on_epoch: Callable[[int, BiganModel], None] | None = None):
    """Alternate critic and generator/encoder updates; returns ``(model, history)``.

    ``train_set`` is an ``(n, input_dim)`` array of normal samples. ``on_step``
    is called after every update with ``(kind, step, model, x, z)`` where kind
    is ``"critic"`` or ``"gen"``.
    """
    cfg.validate()
    data = np.asarray(train_set, dtype=np.float64)
    if data.ndim != 2 or len(data) == 0:
        raise ValueError("train_set must be a nonempty 2-D array of encoded normal samples")
    if not np.all(np.isfinite(data)):
        raise ValueError("train_set contains non-finite values")

    rng = make_rng(cfg.seed)
    model = init_model(cfg, rng, input_dim=data.shape[1])
    history = TrainHistory()

    opt_d = rms_init(model.critic)
    opt_g = rms_init(model.generator)
    opt_e = rms_init(model.encoder)
    n, bs, k = len(data), cfg.batch_size, cfg.critic_steps_per_gen_step
    critic_steps = gen_steps = 0

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        perm = rng.permutation(n)
        c_vals, g_vals = [], []
        for start in range(0, n, bs):
            x = data[perm[start:start + bs]]
            z = sample_latent(cfg, len(x), rng)
            value, gd = critic_grads(model, x, z, cfg.objective, "train", rng)
            if not np.isfinite(value):
                raise TrainingFault("non-finite critic objective", step=critic_steps, epoch=epoch)
            sgd_rmsprop_step(model.critic, gd, opt_d, cfg.learning_rate, cfg.rms_decay, step=critic_steps)
            if cfg.objective == "wasserstein":
                clip_weights(model.critic, cfg.clip_bound)
            critic_steps += 1
            c_vals.append(value)
            if on_step is not None:
                on_step("critic", critic_steps, model, x, z)

            if critic_steps % k == 0:
                z = sample_latent(cfg, len(x), rng)
                value, gg, ge = generator_encoder_grads(model, x, z, cfg.objective, "train", rng)
                if not np.isfinite(value):
                    raise TrainingFault("non-finite generator objective", step=gen_steps, epoch=epoch)
                sgd_rmsprop_step(model.generator, gg, opt_g, cfg.learning_rate, cfg.rms_decay, step=gen_steps)
                sgd_rmsprop_step(model.encoder, ge, opt_e, cfg.learning_rate, cfg.rms_decay, step=gen_steps)
                gen_steps += 1
                g_vals.append(value)
                if on_step is not None:
                    on_step("gen", gen_steps, model, x, z)

        history.records.append(EpochRecord(
            epoch,
            float(np.mean(c_vals)),
            float(np.mean(g_vals)) if g_vals else float("nan"),
            time.perf_counter() - t0,
            critic_steps,
            gen_steps,
        ))
        if on_epoch is not None:
            on_epoch(epoch, model)
    return model, history
