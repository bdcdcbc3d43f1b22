"""Cross-entropy, KL, JS and 1-D Wasserstein distance on discrete distributions.

Natural logs throughout, ``0 * log 0 = 0``, and an unmatched support gives
``math.inf`` instead of raising.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteDist:
    positions: tuple
    probs: tuple

    def __init__(self, positions, probs):
        pos = np.asarray(positions, dtype=np.float64).ravel()
        p = np.asarray(probs, dtype=np.float64).ravel()
        if pos.shape != p.shape or pos.size == 0:
            raise DomainError("positions and probs must be nonempty and equally long")
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(p)):
            raise DomainError("non-finite entry in distribution")
        if np.any(p < 0):
            raise DomainError("negative probability")
        if abs(p.sum() - 1.0) > 1e-12:
            raise DomainError(f"probabilities sum to {p.sum()!r}, not 1")
        if np.any(np.diff(pos) <= 0):
            raise DomainError("support positions must be unique and sorted")
        object.__setattr__(self, "positions", tuple(pos.tolist()))
        object.__setattr__(self, "probs", tuple(p.tolist()))

    @classmethod
    def on_range(cls, probs) -> "DiscreteDist":
        """Distribution over outcomes placed at 0, 1, 2, ..."""
        probs = np.asarray(probs, dtype=np.float64)
        return cls(np.arange(probs.size, dtype=np.float64), probs)

    @classmethod
    def point_mass(cls, at: float) -> "DiscreteDist":
        return cls([at], [1.0])


def align(p: DiscreteDist, q: DiscreteDist):
    """Zero-pad both distributions onto the union of their supports."""
    support = np.union1d(p.positions, q.positions)
    pa = np.zeros(support.size)
    qa = np.zeros(support.size)
    pa[np.searchsorted(support, p.positions)] = p.probs
    qa[np.searchsorted(support, q.positions)] = q.probs
    return support, pa, qa


def _xlogy_ratio(a: np.ndarray, b: np.ndarray) -> float:
    # sum a*log(a/b) with 0*log(0/.) = 0 and a>0, b=0 -> inf
    nz = a > 0
    if np.any(b[nz] == 0):
        return math.inf
    return float(np.sum(a[nz] * (np.log(a[nz]) - np.log(b[nz]))))


def entropy(p: DiscreteDist) -> float:
    a = np.asarray(p.probs)
    nz = a > 0
    return float(-np.sum(a[nz] * np.log(a[nz])))


def cross_entropy(p: DiscreteDist, q: DiscreteDist) -> float:
    _, pa, qa = align(p, q)
    nz = pa > 0
    if np.any(qa[nz] == 0):
        return math.inf
    return float(-np.sum(pa[nz] * np.log(qa[nz])))


def kl(p: DiscreteDist, q: DiscreteDist) -> float:
    _, pa, qa = align(p, q)
    return max(_xlogy_ratio(pa, qa), 0.0)


def js(p: DiscreteDist, q: DiscreteDist) -> float:
    _, pa, qa = align(p, q)
    m = 0.5 * (pa + qa)
    val = 0.5 * _xlogy_ratio(pa, m) + 0.5 * _xlogy_ratio(qa, m)
    return min(max(val, 0.0), LN2)


def wasserstein1(p: DiscreteDist, q: DiscreteDist) -> float:
    support, pa, qa = align(p, q)
    if support.size == 1:
        return 0.0
    cdf_gap = np.abs(np.cumsum(pa) - np.cumsum(qa))[:-1]
    return float(np.sum(cdf_gap * np.diff(support)))


def saturation_sweep(separations) -> list[tuple[float, float, float]]:
    """JS and W1 between point masses at 0 and each separation.

    JS jumps to ln 2 as soon as the supports stop overlapping and then stays
    flat, while W1 keeps tracking the separation.
    """
    rows = []
    anchor = DiscreteDist.point_mass(0.0)
    for theta in separations:
        theta = float(theta)
        if theta < 0 or not math.isfinite(theta):
            raise DomainError(f"separation must be finite and nonnegative, got {theta}")
        other = DiscreteDist.point_mass(theta)
        rows.append((theta, js(anchor, other), wasserstein1(anchor, other)))
    return rows
