"""Dense layers, a recording forward pass and reverse-mode gradients for MLPs.

Everything is float64. Inputs may be a single vector ``(n_in,)`` or a batch
``(batch, n_in)``; weights are stored ``(n_out, n_in)`` so a layer computes
``act(x @ W.T + b)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid", "identity")
CHECKPOINT_VERSION = 1


class ShapeError(ValueError):
    pass


class TapeError(RuntimeError):
    """Raised when gradients are requested without a completed forward pass."""


class TrainingFault(FloatingPointError):
    def __init__(self, message: str, step: int | None = None, epoch: int | None = None):
        self.step = step
        self.epoch = epoch
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if step is not None:
            where.append(f"step {step}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


def make_rng(seed: int) -> np.random.Generator:
    # Philox is counter-based: streams are reproducible across platforms.
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "identity"
    dropout: float = 0.0
    slope: float = 0.2

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"bias length {self.bias.shape} does not match {self.weights.shape[0]} output rows"
            )
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {self.dropout}")

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.bias.copy(), self.activation, self.dropout, self.slope)


def glorot_layer(n_in: int, n_out: int, rng: np.random.Generator, activation="identity",
                 dropout=0.0, slope=0.2) -> DenseLayer:
    a = np.sqrt(6.0 / (n_in + n_out))
    w = rng.uniform(-a, a, size=(n_out, n_in))
    return DenseLayer(w, np.zeros(n_out), activation, dropout, slope)


def _activate(kind: str, u: np.ndarray, slope: float) -> np.ndarray:
    if kind == "identity":
        return u
    if kind == "relu":
        return np.maximum(u, 0.0)
    if kind == "leaky_relu":
        return np.where(u > 0, u, slope * u)
    if kind == "tanh":
        return np.tanh(u)
    # numerically stable logistic
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    e = np.exp(u[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _activation_grad(kind: str, u: np.ndarray, a: np.ndarray, slope: float) -> np.ndarray:
    if kind == "identity":
        return np.ones_like(u)
    if kind == "relu":
        return (u > 0).astype(np.float64)
    if kind == "leaky_relu":
        return np.where(u > 0, 1.0, slope)
    if kind == "tanh":
        return 1.0 - a * a
    return a * (1.0 - a)


def _check_input(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != layer.n_in:
        raise ShapeError(f"layer expects input width {layer.n_in}, got shape {x.shape}")
    return x


def dense_forward(layer: DenseLayer, x, mode: str = "eval", rng: np.random.Generator | None = None):
    """One layer: ``act(W x + b)``, with inverted dropout in train mode."""
    out, _ = _dense_forward(layer, x, mode, rng)
    return out


def _dense_forward(layer, x, mode, rng):
    x = _check_input(layer, x)
    u = x @ layer.weights.T + layer.bias
    a = _activate(layer.activation, u, layer.slope)
    mask = None
    if mode == "train" and layer.dropout > 0.0:
        if rng is None:
            raise ValueError("train-mode dropout needs an rng")
        keep = 1.0 - layer.dropout
        mask = (rng.random(a.shape) < keep) / keep
        out = a * mask
    else:
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        out = a
    return out, (x, u, a, mask)


@dataclass
class Tape:
    """Per-layer caches from one forward pass, consumed in reverse by ``backward``."""

    records: list = field(default_factory=list)
    consumed: bool = False


@dataclass
class LayerGrad:
    weights: np.ndarray
    bias: np.ndarray


class Mlp:
    def __init__(self, layers: list[DenseLayer]):
        for prev, nxt in zip(layers, layers[1:]):
            if prev.n_out != nxt.n_in:
                raise ShapeError(f"layer widths do not chain: {prev.n_out} -> {nxt.n_in}")
        self.layers = layers

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def n_params(self) -> int:
        return sum(l.weights.size + l.bias.size for l in self.layers)

    def copy(self) -> "Mlp":
        return Mlp([l.copy() for l in self.layers])

    def forward(self, x, mode="eval", rng=None, tape: Tape | None = None, collect=None):
        """Run the network.

        With ``tape`` given, the per-layer caches needed by ``backward`` are
        appended to it. ``collect`` is an optional list of layer indices whose
        outputs (before dropout) are returned alongside the final output.
        """
        h = x
        taps = []
        for i, layer in enumerate(self.layers):
            h, rec = _dense_forward(layer, h, mode, rng)
            if tape is not None:
                tape.records.append(rec)
            if collect is not None and i in collect:
                taps.append(rec[2])
        if collect is not None:
            return h, taps
        return h

    def backward(self, tape: Tape, seed_grad, tap_grads: dict | None = None):
        """Gradients of ``sum(seed_grad * output)`` w.r.t. every layer and the input.

        ``tap_grads`` maps a layer index to an extra upstream gradient on that
        layer's pre-dropout output, for losses defined on intermediate taps.
        Returns ``(layer_grads, input_grad)``.
        """
        if tape is None or len(tape.records) != len(self.layers):
            raise TapeError("backward called without a matching completed forward pass")
        if tape.consumed:
            raise TapeError("tape already replayed")
        tape.consumed = True
        g = np.asarray(seed_grad, dtype=np.float64)
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            x, u, a, mask = tape.records[i]
            if g.shape != a.shape:
                raise ShapeError(f"gradient shape {g.shape} does not match layer output {a.shape}")
            if mask is not None:
                g = g * mask
            if tap_grads and i in tap_grads:
                g = g + tap_grads[i]
            gu = g * _activation_grad(layer.activation, u, a, layer.slope)
            if x.ndim == 1:
                gw = np.outer(gu, x)
                gb = gu.copy()
            else:
                gw = gu.T @ x
                gb = gu.sum(axis=0)
            grads[i] = LayerGrad(gw, gb)
            g = gu @ layer.weights
        return grads, g


def backward(mlp: Mlp, tape: Tape, seed_grad):
    return mlp.backward(tape, seed_grad)


@dataclass
class RmsState:
    sq: list  # running mean of squared grads, one (w, b) pair per layer


def rms_init(mlp: Mlp) -> RmsState:
    return RmsState([(np.zeros_like(l.weights), np.zeros_like(l.bias)) for l in mlp.layers])


def sgd_rmsprop_step(mlp: Mlp, grads: list[LayerGrad], state: RmsState, lr: float,
                     decay: float = 0.9, eps: float = 1e-8, step: int | None = None):
    """In-place RMSProp descent step; returns ``(mlp, state)``.

    ``v <- decay*v + (1-decay)*g^2``, ``p <- p - lr*g/(sqrt(v)+eps)``.
    """
    if len(grads) != len(mlp.layers) or len(state.sq) != len(mlp.layers):
        raise ShapeError("params, grads and optimizer state disagree in layer count")
    for g in grads:
        if not (np.all(np.isfinite(g.weights)) and np.all(np.isfinite(g.bias))):
            raise TrainingFault("non-finite gradient", step=step)
    new_sq = []
    for layer, g, (vw, vb) in zip(mlp.layers, grads, state.sq):
        if g.weights.shape != layer.weights.shape or g.bias.shape != layer.bias.shape:
            raise ShapeError("gradient shape does not match parameter shape")
        vw = decay * vw + (1.0 - decay) * g.weights ** 2
        vb = decay * vb + (1.0 - decay) * g.bias ** 2
        layer.weights -= lr * g.weights / (np.sqrt(vw) + eps)
        layer.bias -= lr * g.bias / (np.sqrt(vb) + eps)
        new_sq.append((vw, vb))
    state.sq = new_sq
    return mlp, state


# -- checkpoint text format -------------------------------------------------

def mlp_to_dict(mlp: Mlp) -> dict:
    # float repr round-trips exactly, so the JSON text is lossless
    return {
        "layers": [
            {
                "n_in": l.n_in,
                "n_out": l.n_out,
                "activation": l.activation,
                "slope": l.slope,
                "dropout": l.dropout,
                "weights": l.weights.ravel().tolist(),
                "bias": l.bias.tolist(),
            }
            for l in mlp.layers
        ]
    }


def mlp_from_dict(d: dict) -> Mlp:
    layers = []
    for spec in d["layers"]:
        w = np.array(spec["weights"], dtype=np.float64)
        if w.size != spec["n_in"] * spec["n_out"]:
            raise ShapeError("checkpoint weight count does not match declared dimensions")
        layers.append(DenseLayer(
            w.reshape(spec["n_out"], spec["n_in"]),
            np.array(spec["bias"], dtype=np.float64),
            spec["activation"], spec["dropout"], spec.get("slope", 0.2),
        ))
    return Mlp(layers)
