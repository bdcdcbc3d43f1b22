"""Synthetic data: a KDD-format fixture and two small array toys.

The KDD-format fixture follows the real file's layout and labelling: the
majority class carries attack names (so it becomes the *normal* class after
the label swap) and the minority carries the literal label ``normal``.
Anomalies are normal-class draws whose continuous features are pushed 3
standard deviations away and whose categorical values go through a fixed
permutation of the vocabulary.
"""
from __future__ import annotations

import numpy as np

from .kdd import FEATURE_NAMES, RawRecord, records_to_text
from .tensor import make_rng

PROTOCOLS = ["icmp", "tcp", "udp"]
SERVICES = ["ecr_i", "private", "http", "smtp", "ftp_data", "domain_u", "other", "telnet"]
FLAGS = ["SF", "S0", "REJ", "RSTR", "SH"]
BINARY = ("land", "logged_in", "is_host_login", "is_guest_login")
CONSTANT = ("urgent", "root_shell", "su_attempted", "num_outbound_cmds")
CATEGORICAL = {"protocol_type": PROTOCOLS, "service": SERVICES, "flag": FLAGS}


def _cluster_params(rng, n_clusters):
    continuous = [f for f in FEATURE_NAMES if f not in CATEGORICAL and f not in BINARY and f not in CONSTANT]
    clusters = []
    for _ in range(n_clusters):
        cats = {}
        for name, vocab in CATEGORICAL.items():
            # one dominant value per cluster, the rest share a small remainder
            p = np.full(len(vocab), 0.1 / (len(vocab) - 1))
            p[rng.integers(len(vocab))] = 0.9
            cats[name] = p / p.sum()
        clusters.append({
            "cats": cats,
            "mean": {f: rng.uniform(20.0, 80.0) for f in continuous},
            "sd": {f: rng.uniform(2.0, 6.0) for f in continuous},
            "p_bin": {f: rng.uniform(0.05, 0.3) for f in BINARY},
        })
    return continuous, clusters


def kdd_fixture(n_records: int = 2000, anomaly_fraction: float = 0.2, seed: int = 7,
                n_clusters: int = 2) -> list[RawRecord]:
    rng = make_rng(seed)
    continuous, clusters = _cluster_params(rng, n_clusters)
    perms = {name: np.roll(np.arange(len(v)), 1 + rng.integers(len(v) - 1)) for name, v in CATEGORICAL.items()}
    attack_names = ["smurf", "neptune", "back", "teardrop"]
    n_anom = int(round(anomaly_fraction * n_records))
    is_anom = np.zeros(n_records, dtype=bool)
    is_anom[rng.choice(n_records, n_anom, replace=False)] = True

    records = []
    for i in range(n_records):
        c = int(rng.integers(n_clusters))
        cl = clusters[c]
        values = {}
        for name, vocab in CATEGORICAL.items():
            k = int(rng.choice(len(vocab), p=cl["cats"][name]))
            if is_anom[i]:
                k = int(perms[name][k])
            values[name] = vocab[k]
        for f in continuous:
            v = rng.normal(cl["mean"][f], cl["sd"][f])
            if is_anom[i]:
                v += 3.0 * cl["sd"][f] * (1.0 if rng.random() < 0.5 else -1.0)
            values[f] = f"{max(v, 0.0):.4f}"
        for f in BINARY:
            hit = rng.random() < cl["p_bin"][f]
            values[f] = str(int(hit != bool(is_anom[i] and rng.random() < 0.5)))
        for f in CONSTANT:
            values[f] = "0"
        label = "normal" if is_anom[i] else attack_names[c % len(attack_names)]
        records.append(RawRecord(tuple(values[f] for f in FEATURE_NAMES), label, i + 1))
    return records


def write_kdd_fixture(path, **kwargs) -> None:
    with open(path, "w") as fh:
        fh.write(records_to_text(kdd_fixture(**kwargs)))


def onehot_toy(n: int, seed: int = 0, n_blocks: int = 5, n_categories: int = 4,
               n_modes: int = 3, purity: float = 0.9) -> np.ndarray:
    """Pure one-hot data: ``n_blocks`` blocks of ``n_categories`` indicator columns.

    Each sample comes from one of ``n_modes`` prototypes; each block keeps the
    prototype's category with probability ``purity``.
    """
    rng = make_rng(seed)
    protos = make_rng(10_000 + n_modes).integers(n_categories, size=(n_modes, n_blocks))
    X = np.zeros((n, n_blocks * n_categories))
    for i in range(n):
        m = rng.integers(n_modes)
        for b in range(n_blocks):
            k = protos[m, b] if rng.random() < purity else rng.integers(n_categories)
            X[i, b * n_categories + k] = 1.0
    return X


def two_cluster_toy(n: int, seed: int = 0, spread: float = 0.05) -> np.ndarray:
    rng = make_rng(seed)
    centers = np.array([[0.25, 0.3], [0.7, 0.75]])
    which = rng.integers(2, size=n)
    return np.clip(centers[which] + spread * rng.standard_normal((n, 2)), 0.0, 1.0)
