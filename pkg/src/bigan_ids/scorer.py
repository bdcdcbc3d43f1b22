"""Anomaly scoring, thresholding rules and the iterative latent-search baseline.

A sample's score mixes the L1 reconstruction error of ``G(E(x))`` with L1
feature-matching distances taken at the critic's tap layers::

    S = (1 - sum(lam)) * residual + sum_i lam_i * discrimination_i
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import BiganModel, criticize, encode, generate, joint_input
from .tensor import ShapeError, Tape, TrainingFault

DEFAULT_LAMBDAS = (0.1, 0.3)


class DegenerateModelError(RuntimeError):
    pass


@dataclass
class ScoreReport:
    sample_id: int
    residual: float
    discrimination: tuple[float, ...]
    score: float
    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS

    def recombine(self) -> float:
        return combine(self.residual, self.discrimination, self.lambdas)


def combine(residual, discrimination, lambdas) -> float:
    lam = tuple(lambdas)
    total = math.fsum(lam)
    return (1.0 - total) * residual + math.fsum(l * d for l, d in zip(lam, discrimination))


def _check_lambdas(lambdas, n_taps):
    lam = tuple(float(v) for v in lambdas)
    if len(lam) != n_taps:
        raise ValueError(f"need one lambda per tap ({n_taps}), got {len(lam)}")
    if any(v < 0 for v in lam) or sum(lam) >= 1:
        raise ValueError("lambdas must be nonnegative with sum below 1")
    return lam


def residual_loss(x, x_hat):
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ShapeError(f"cannot compare shapes {x.shape} and {x_hat.shape}")
    out = np.abs(x - x_hat).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def discrimination_loss(model: BiganModel, x, z):
    """Per-tap L1 distance between critic features of ``(x, z)`` and ``(G(z), z)``.

    Returns a list of floats for a single sample, or a ``(batch, n_taps)``
    array for a batch.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    joint_input(model, x, z)  # shape validation
    real = criticize(model, x, z).taps
    fake = criticize(model, generate(model, z), z).taps
    per_tap = [np.abs(a - b).sum(axis=-1) for a, b in zip(real, fake)]
    if x.ndim == 1:
        return [float(v) for v in per_tap]
    return np.stack(per_tap, axis=-1)


def score_batch(model: BiganModel, x, lambdas=DEFAULT_LAMBDAS, sample_ids=None,
                check_degenerate: bool = True) -> list[ScoreReport]:
    """Single-pass scores for every row of ``x`` through encoder, generator and critic."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    lam = _check_lambdas(lambdas, len(model.tap_indices))
    if sample_ids is None:
        sample_ids = range(len(x))
    sample_ids = list(sample_ids)
    if len(sample_ids) != len(x):
        raise ShapeError("one sample id per row required")
    z = encode(model, x)
    x_hat = generate(model, z)
    res = np.abs(x - x_hat).sum(axis=-1)
    disc = discrimination_loss(model, x, z)
    reports = []
    for i, sid in enumerate(sample_ids):
        d = tuple(float(v) for v in disc[i])
        r = float(res[i])
        reports.append(ScoreReport(int(sid), r, d, combine(r, d, lam), lam))
    if check_degenerate and len(reports) > 1 and len({r.score for r in reports}) == 1:
        raise DegenerateModelError("every sample received the same score; the model looks untrained")
    return reports


def anomaly_score(model: BiganModel, x, lambdas=DEFAULT_LAMBDAS, sample_id: int = 0) -> ScoreReport:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("anomaly_score takes one sample; use score_batch for batches")
    return score_batch(model, x[None, :], lambdas, [sample_id], check_degenerate=False)[0]


def _search_loss_and_grad(model, x, z, lam):
    """Per-sample anomaly-score loss at latent ``z`` and its gradient w.r.t. ``z``."""
    d = model.input_dim
    t_gen, t_real, t_fake = Tape(), Tape(), Tape()
    gz = model.generator.forward(z, "eval", None, t_gen)
    _, f_real = model.critic.forward(joint_input(model, x, z), "eval", None, t_real, collect=model.tap_indices)
    _, f_fake = model.critic.forward(joint_input(model, gz, z), "eval", None, t_fake, collect=model.tap_indices)

    w_res = 1.0 - sum(lam)
    r = x - gz
    loss = w_res * np.abs(r).sum(axis=-1)
    g_gz = -w_res * np.sign(r)
    tg_real, tg_fake = {}, {}
    for idx, l, a, b in zip(model.tap_indices, lam, f_real, f_fake):
        diff = a - b
        loss = loss + l * np.abs(diff).sum(axis=-1)
        tg_real[idx] = l * np.sign(diff)
        tg_fake[idx] = -l * np.sign(diff)

    zero = np.zeros((len(z), 1))
    _, gin_real = model.critic.backward(t_real, zero, tg_real)
    _, gin_fake = model.critic.backward(t_fake, zero, tg_fake)
    g_gz = g_gz + gin_fake[:, :d]
    _, gz_from_gen = model.generator.backward(t_gen, g_gz)
    grad = gz_from_gen + gin_real[:, d:] + gin_fake[:, d:]
    return loss, grad


def anogan_search(model: BiganModel, x, steps: int = 500, step_size: float = 1e-3,
                  rng: np.random.Generator | None = None, lambdas=DEFAULT_LAMBDAS):
    """Recover a latent code for ``x`` by gradient descent, starting from a random draw.

    The model is frozen; only ``z`` moves. Returns ``(z_best, trajectory)``
    where ``trajectory[k]`` is the loss at the k-th iterate (``steps + 1``
    entries, the first at the random start). Batched input gives a
    ``(batch, latent_dim)`` result and a ``(steps + 1, batch)`` trajectory.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if rng is None:
        raise ValueError("anogan_search needs an rng for its starting point")
    lam = _check_lambdas(lambdas, len(model.tap_indices))
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != model.input_dim:
        raise ShapeError(f"input vector must have length {model.input_dim}")

    z = rng.standard_normal((len(x), model.latent_dim))
    best_z = z.copy()
    best = np.full(len(x), np.inf)
    trajectory = []
    for k in range(steps + 1):
        loss, grad = _search_loss_and_grad(model, x, z, lam)
        if not np.all(np.isfinite(loss)) or not np.all(np.isfinite(grad)):
            raise TrainingFault("non-finite loss during latent search", step=k)
        trajectory.append(loss)
        better = loss < best
        best[better] = loss[better]
        best_z[better] = z[better]
        if k < steps:
            z = z - step_size * grad
    trajectory = np.array(trajectory)
    if single:
        return best_z[0], trajectory[:, 0]
    return best_z, trajectory


# -- selection rules ----------------------------------------------------------

@dataclass(frozen=True)
class ThresholdRule:
    kind: str  # "fixed" or "contamination"
    value: float

    def __post_init__(self):
        if self.kind not in ("fixed", "contamination"):
            raise ValueError(f"unknown rule kind {self.kind!r}")
        if not math.isfinite(self.value):
            raise ValueError("rule value must be finite")
        if self.kind == "contamination" and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"contamination rate must lie in [0, 1], got {self.value}")

    @classmethod
    def fixed(cls, tau: float) -> "ThresholdRule":
        return cls("fixed", float(tau))

    @classmethod
    def contamination(cls, c: float) -> "ThresholdRule":
        return cls("contamination", float(c))

    @classmethod
    def parse(cls, text: str) -> "ThresholdRule":
        """``contamination:0.2`` or ``fixed:1.5`` (``threshold:`` also accepted)."""
        kind, _, val = text.partition(":")
        kind = {"threshold": "fixed", "top": "contamination"}.get(kind.strip(), kind.strip())
        try:
            value = float(val)
        except ValueError:
            raise ValueError(f"cannot parse threshold rule {text!r}") from None
        return cls(kind, value)

    def __str__(self):
        return f"{self.kind}:{self.value!r}"


def flag_count(c: float, n: int) -> int:
    return int(math.floor(c * n + 0.5))


def apply_threshold(reports, rule: ThresholdRule) -> list[bool]:
    """Verdict per report, ``True`` meaning anomalous.

    The contamination rule flags exactly ``floor(c*N + 0.5)`` samples: the
    highest scores, ties going to the lower sample id.
    """
    reports = list(reports)
    if rule.kind == "fixed":
        return [r.score > rule.value for r in reports]
    if not reports:
        raise ValueError("contamination rule needs at least one report")
    k = flag_count(rule.value, len(reports))
    order = sorted(range(len(reports)), key=lambda i: (-reports[i].score, reports[i].sample_id))
    flagged = set(order[:k])
    return [i in flagged for i in range(len(reports))]


def _f1(pred: np.ndarray, truth: np.ndarray) -> float:
    tp = np.sum(pred & truth)
    fp = np.sum(pred & ~truth)
    fn = np.sum(~pred & truth)
    return 0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn)


def calibrate_threshold(scores, truths) -> float:
    """Threshold maximising F1 over midpoints between consecutive distinct scores.

    ``truths`` are booleans, ``True`` for known intrusions. Ties in F1 go to
    the smallest threshold.
    """
    s = np.asarray([getattr(v, "score", v) for v in scores], dtype=np.float64)
    t = np.asarray(truths, dtype=bool)
    if s.shape != t.shape:
        raise ShapeError("scores and truths differ in length")
    if t.all() or not t.any():
        raise ValueError("calibration needs both intrusions and normals")
    u = np.unique(s)
    if len(u) < 2:
        raise ValueError("all scores are equal; no threshold separates anything")
    mids = 0.5 * (u[:-1] + u[1:])
    best_tau, best_f1 = mids[0], -1.0
    for tau in mids:
        f = _f1(s > tau, t)
        if f > best_f1:
            best_tau, best_f1 = tau, f
    return float(best_tau)
