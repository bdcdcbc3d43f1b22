"""Generator, encoder and joint critic of the bidirectional GAN."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor import (
    CHECKPOINT_VERSION,
    Mlp,
    ShapeError,
    Tape,
    glorot_layer,
    mlp_from_dict,
    mlp_to_dict,
)

GENERATOR_HIDDEN = (64, 128)
ENCODER_HIDDEN = (128, 64)
CRITIC_HIDDEN = (256, 128, 64)
CRITIC_DROPOUT = 0.2
LEAKY_SLOPE = 0.2


@dataclass
class CriticOutput:
    score: np.ndarray  # scalar, or (batch,) for batched input
    taps: list[np.ndarray]


@dataclass
class BiganModel:
    generator: Mlp
    encoder: Mlp
    critic: Mlp
    tap_indices: tuple[int, ...]
    latent_dim: int
    input_dim: int
    architecture: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tap_indices = tuple(int(i) for i in self.tap_indices)
        if self.generator.n_in != self.latent_dim or self.generator.n_out != self.input_dim:
            raise ShapeError("generator must map latent_dim -> input_dim")
        if self.encoder.n_in != self.input_dim or self.encoder.n_out != self.latent_dim:
            raise ShapeError("encoder must map input_dim -> latent_dim")
        if self.critic.n_in != self.input_dim + self.latent_dim or self.critic.n_out != 1:
            raise ShapeError("critic must map input_dim + latent_dim -> 1")
        n_hidden = len(self.critic.layers) - 1
        if any(b <= a for a, b in zip(self.tap_indices, self.tap_indices[1:])):
            raise ValueError("tap indices must be strictly increasing")
        if any(not 0 <= i < n_hidden for i in self.tap_indices):
            raise ValueError(f"tap indices must name hidden critic layers 0..{n_hidden - 1}")

    def copy(self) -> "BiganModel":
        return BiganModel(self.generator.copy(), self.encoder.copy(), self.critic.copy(),
                          self.tap_indices, self.latent_dim, self.input_dim, dict(self.architecture))

    def n_params(self) -> int:
        return self.generator.n_params() + self.encoder.n_params() + self.critic.n_params()

    def tap_widths(self) -> list[int]:
        return [self.critic.layers[i].n_out for i in self.tap_indices]


def _stack(n_in, hidden, n_out, out_act, rng, dropout=0.0):
    widths = [n_in, *hidden, n_out]
    layers = []
    for k, (a, b) in enumerate(zip(widths, widths[1:])):
        last = k == len(widths) - 2
        layers.append(glorot_layer(
            a, b, rng,
            activation=out_act if last else "leaky_relu",
            dropout=0.0 if last else dropout,
            slope=LEAKY_SLOPE,
        ))
    return Mlp(layers)


def init_model(cfg, rng: np.random.Generator, input_dim: int | None = None) -> BiganModel:
    """Build a freshly initialized model.

    ``cfg`` needs ``latent_dim`` and ``input_dim`` (or pass ``input_dim``).
    Optional cfg fields ``generator_hidden``, ``encoder_hidden``,
    ``critic_hidden`` and ``critic_dropout`` override the default widths.
    """
    input_dim = input_dim if input_dim is not None else cfg.input_dim
    latent = cfg.latent_dim
    if input_dim <= 0 or latent <= 0:
        raise ValueError("input_dim and latent_dim must be positive")
    g_hidden = tuple(getattr(cfg, "generator_hidden", None) or GENERATOR_HIDDEN)
    e_hidden = tuple(getattr(cfg, "encoder_hidden", None) or ENCODER_HIDDEN)
    d_hidden = tuple(getattr(cfg, "critic_hidden", None) or CRITIC_HIDDEN)
    dropout = getattr(cfg, "critic_dropout", CRITIC_DROPOUT)

    generator = _stack(latent, g_hidden, input_dim, "sigmoid", rng)
    encoder = _stack(input_dim, e_hidden, latent, "identity", rng)
    critic = _stack(input_dim + latent, d_hidden, 1, "identity", rng, dropout=dropout)
    n_hidden = len(d_hidden)
    taps = tuple(range(max(n_hidden - 2, 0), n_hidden))
    arch = {
        "generator_hidden": list(g_hidden),
        "encoder_hidden": list(e_hidden),
        "critic_hidden": list(d_hidden),
        "critic_dropout": dropout,
        "hidden_activation": f"leaky_relu({LEAKY_SLOPE})",
    }
    return BiganModel(generator, encoder, critic, taps, latent, input_dim, arch)


def generate(model: BiganModel, z, mode="eval", rng=None, tape: Tape | None = None):
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1:] != (model.latent_dim,):
        raise ShapeError(f"latent vector must have length {model.latent_dim}, got {z.shape}")
    return model.generator.forward(z, mode, rng, tape)


def encode(model: BiganModel, x, mode="eval", rng=None, tape: Tape | None = None):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (model.input_dim,):
        raise ShapeError(f"input vector must have length {model.input_dim}, got {x.shape}")
    return model.encoder.forward(x, mode, rng, tape)


def joint_input(model: BiganModel, x, z) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape[-1:] != (model.input_dim,) or z.shape[-1:] != (model.latent_dim,):
        raise ShapeError(
            f"critic expects x of width {model.input_dim} and z of width {model.latent_dim}, "
            f"got {x.shape} and {z.shape}"
        )
    if x.shape[:-1] != z.shape[:-1]:
        raise ShapeError(f"x batch {x.shape[:-1]} and z batch {z.shape[:-1]} differ")
    return np.concatenate([x, z], axis=-1)


def criticize(model: BiganModel, x, z, mode="eval", rng=None, tape: Tape | None = None) -> CriticOutput:
    out, taps = model.critic.forward(joint_input(model, x, z), mode, rng, tape, collect=model.tap_indices)
    return CriticOutput(out[..., 0], taps)


# -- checkpoints ------------------------------------------------------------

def model_to_dict(model: BiganModel) -> dict:
    return {
        "format": "bigan-ids-checkpoint",
        "version": CHECKPOINT_VERSION,
        "latent_dim": model.latent_dim,
        "input_dim": model.input_dim,
        "tap_indices": list(model.tap_indices),
        "architecture": model.architecture,
        "generator": mlp_to_dict(model.generator),
        "encoder": mlp_to_dict(model.encoder),
        "critic": mlp_to_dict(model.critic),
    }


def model_from_dict(d: dict) -> BiganModel:
    if d.get("format") != "bigan-ids-checkpoint":
        raise ValueError("not a bigan-ids checkpoint")
    if d.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {d.get('version')}")
    return BiganModel(
        mlp_from_dict(d["generator"]), mlp_from_dict(d["encoder"]), mlp_from_dict(d["critic"]),
        tuple(d["tap_indices"]), d["latent_dim"], d["input_dim"], d.get("architecture", {}),
    )


def save_checkpoint(model: BiganModel, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(model_to_dict(model), indent=1))
    return path


def load_checkpoint(path) -> BiganModel:
    return model_from_dict(json.loads(Path(path).read_text()))
