"""KDD-99 connection records: parsing, label swap, encoding and splitting."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor import make_rng

FEATURE_NAMES = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
    "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
    "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
    "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
    "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
)
N_FIELDS = len(FEATURE_NAMES) + 1
CATEGORICAL = ("protocol_type", "service", "flag")
SCHEMA_VERSION = 1

NORMAL, ANOMALOUS = "normal", "anomalous"


class KddParseError(ValueError):
    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        head = "; ".join(f"line {n}: {msg}" for n, msg in problems[:5])
        more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
        super().__init__(f"malformed KDD records: {head}{more}")


class InsufficientDataError(ValueError):
    pass


@dataclass
class RawRecord:
    fields: tuple[str, ...]
    label: str
    line: int = 0
    record_class: str | None = None  # NORMAL / ANOMALOUS once swapped

    def value(self, name: str) -> str:
        return self.fields[FEATURE_NAMES.index(name)]


def parse_kdd(lines) -> list[RawRecord]:
    """Parse comma-separated lines; blank lines are skipped.

    Every malformed line is collected and reported in one ``KddParseError``.
    """
    records, problems = [], []
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != N_FIELDS:
            problems.append((n, f"expected {N_FIELDS} fields, found {len(parts)}"))
            continue
        label = parts[-1]
        if label.endswith("."):
            label = label[:-1]
        if not label:
            problems.append((n, "empty label"))
            continue
        records.append(RawRecord(tuple(parts[:-1]), label, n))
    if problems:
        raise KddParseError(problems)
    return records


def read_kdd(path) -> list[RawRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_kdd(fh)


def label_class(label: str, swapped: bool = True) -> str:
    """Class of a raw label. With the swap, attacks are the normal class."""
    is_normal_label = label == "normal"
    if swapped:
        return ANOMALOUS if is_normal_label else NORMAL
    return NORMAL if is_normal_label else ANOMALOUS


def swap_labels(records: list[RawRecord]) -> list[RawRecord]:
    """Assign classes so attack traffic is "normal" and genuine normal traffic is anomalous.

    Records that already carry a class get it flipped, so the swap is an
    involution on classes.
    """
    out = []
    for r in records:
        if r.record_class is None:
            cls = label_class(r.label, swapped=True)
        else:
            cls = ANOMALOUS if r.record_class == NORMAL else NORMAL
        out.append(RawRecord(r.fields, r.label, r.line, cls))
    return out


def assign_classes(records: list[RawRecord], swap: bool = True) -> list[RawRecord]:
    """Fresh class assignment from the raw labels, with or without the swap."""
    return [RawRecord(r.fields, r.label, r.line, label_class(r.label, swap)) for r in records]


def record_class(r: RawRecord) -> str:
    return r.record_class if r.record_class is not None else label_class(r.label, swapped=True)


# -- encoding -----------------------------------------------------------------

@dataclass
class FeatureSpec:
    name: str
    kind: str  # "categorical" or "continuous"
    vocabulary: list[str] = field(default_factory=list)
    lo: float = 0.0
    hi: float = 0.0

    @property
    def width(self) -> int:
        return len(self.vocabulary) if self.kind == "categorical" else 1


@dataclass
class EncodingSchema:
    features: list[FeatureSpec]
    dummy: bool = False

    def block_width(self, f: FeatureSpec) -> int:
        if f.kind == "categorical" and self.dummy:
            return max(len(f.vocabulary) - 1, 0)
        return f.width

    @property
    def width(self) -> int:
        return sum(self.block_width(f) for f in self.features)

    def blocks(self) -> list[tuple[FeatureSpec, slice]]:
        out, start = [], 0
        for f in self.features:
            w = self.block_width(f)
            out.append((f, slice(start, start + w)))
            start += w
        return out

    def to_dict(self) -> dict:
        return {
            "format": "bigan-ids-schema",
            "version": SCHEMA_VERSION,
            "dummy": self.dummy,
            "width": self.width,
            "features": [
                {"name": f.name, "kind": f.kind, "vocabulary": f.vocabulary, "lo": f.lo, "hi": f.hi}
                for f in self.features
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncodingSchema":
        if d.get("format") != "bigan-ids-schema" or d.get("version") != SCHEMA_VERSION:
            raise ValueError("not a supported schema document")
        return cls([FeatureSpec(**f) for f in d["features"]], d["dummy"])

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "EncodingSchema":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _number(text: str, rec: RawRecord, name: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValueError(f"line {rec.line}: field {name} is not numeric: {text!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"line {rec.line}: field {name} is not finite")
    return v


def fit_schema(records: list[RawRecord], dummy: bool = False) -> EncodingSchema:
    """Vocabularies and min/max ranges from training records only."""
    if not records:
        raise ValueError("cannot fit a schema on zero records")
    features = []
    for j, name in enumerate(FEATURE_NAMES):
        if name in CATEGORICAL:
            vocab = sorted({r.fields[j] for r in records})
            features.append(FeatureSpec(name, "categorical", vocab))
        else:
            vals = [_number(r.fields[j], r, name) for r in records]
            features.append(FeatureSpec(name, "continuous", lo=min(vals), hi=max(vals)))
    return EncodingSchema(features, dummy)


@dataclass
class EncodedSample:
    features: np.ndarray
    truth: str
    sample_id: int


def encode_features(record: RawRecord, schema: EncodingSchema) -> np.ndarray:
    out = np.zeros(schema.width)
    for j, (f, sl) in enumerate(schema.blocks()):
        text = record.fields[j]
        if f.kind == "categorical":
            if text in f.vocabulary:
                k = f.vocabulary.index(text)
                if schema.dummy:
                    if k > 0:
                        out[sl.start + k - 1] = 1.0
                else:
                    out[sl.start + k] = 1.0
        else:
            v = _number(text, record, f.name)
            span = f.hi - f.lo
            out[sl.start] = 0.0 if span <= 0 else min(max((v - f.lo) / span, 0.0), 1.0)
    return out


def encode(record: RawRecord, schema: EncodingSchema, sample_id: int = 0) -> EncodedSample:
    return EncodedSample(encode_features(record, schema), record_class(record), sample_id)


def encode_many(records, schema, ids=None) -> tuple[np.ndarray, np.ndarray]:
    """Stack encoded features; returns ``(X, is_anomalous)``."""
    X = np.array([encode_features(r, schema) for r in records]).reshape(len(records), schema.width)
    y = np.array([record_class(r) == ANOMALOUS for r in records], dtype=bool)
    return X, y


def decode(vec, schema: EncodingSchema) -> list:
    """Approximate inverse of encoding: category names (or None) and rescaled numbers."""
    out = []
    for f, sl in schema.blocks():
        block = np.asarray(vec[sl])
        if f.kind == "categorical":
            if schema.dummy:
                nz = np.flatnonzero(block)
                out.append(f.vocabulary[nz[0] + 1] if nz.size else (f.vocabulary[0] if f.vocabulary else None))
            else:
                nz = np.flatnonzero(block)
                out.append(f.vocabulary[nz[0]] if nz.size else None)
        else:
            out.append(f.lo + float(block[0]) * (f.hi - f.lo))
    return out


# -- splitting ------------------------------------------------------------------

@dataclass
class Split:
    train: list[RawRecord]
    test: list[RawRecord]
    train_index: np.ndarray  # positions in the input record list
    test_index: np.ndarray
    pool_index: np.ndarray  # the held-out half the test set was drawn from


def plan_test_set(n_normal: int, n_anomalous: int, c: float, test_size: int | None = None):
    """Return ``(size, n_anomalies)`` of a test set with contamination ``c``.

    Without ``test_size`` the largest test set the pools support is used.
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"contamination must lie in [0, 1], got {c}")
    k = lambda t: int(math.floor(c * t + 0.5))  # noqa: E731
    if test_size is not None:
        need = k(test_size)
        if need > n_anomalous or test_size - need > n_normal:
            max_c = n_anomalous / test_size if test_size else 0.0
            raise InsufficientDataError(
                f"cannot build a test set of {test_size} at contamination {c}: "
                f"{n_anomalous} anomalous and {n_normal} normal records available "
                f"(maximum achievable contamination is {max_c:.4f})"
            )
        return test_size, need
    best = 0
    for t in range(n_normal + n_anomalous, 0, -1):
        if k(t) <= n_anomalous and t - k(t) <= n_normal:
            best = t
            break
    if best == 0 or (c > 0 and n_anomalous == 0):
        raise InsufficientDataError(
            f"no anomalous records available for contamination {c} (maximum achievable contamination is 0)"
        )
    return best, k(best)


def split(records: list[RawRecord], seed: int, contamination: float,
          test_size: int | None = None) -> Split:
    """Shuffle, halve, train on the normals of the first half, test on the second.

    The test set holds exactly ``floor(c*|test| + 0.5)`` anomalous records.
    """
    rng = make_rng(seed)
    n = len(records)
    perm = rng.permutation(n)
    half_a, half_b = perm[: n // 2], perm[n // 2:]
    anomalous = np.array([record_class(r) == ANOMALOUS for r in records], dtype=bool)
    train_idx = half_a[~anomalous[half_a]]
    test_idx = compose_test_set(anomalous, seed + 1, contamination, test_size, candidates=half_b)
    return Split(
        [records[i] for i in train_idx], [records[i] for i in test_idx],
        train_idx, test_idx, half_b,
    )


def compose_test_set(is_anomalous, seed: int, contamination: float,
                     test_size: int | None = None, candidates=None) -> np.ndarray:
    """Indices of a test set at ``contamination`` drawn from ``candidates``.

    ``is_anomalous`` is indexed by record position; ``candidates`` (default:
    all positions) is the pool to draw from.
    """
    is_anomalous = np.asarray(is_anomalous, dtype=bool)
    pool = np.arange(len(is_anomalous)) if candidates is None else np.asarray(candidates, dtype=int)
    normals = pool[~is_anomalous[pool]]
    anomalies = pool[is_anomalous[pool]]
    size, n_anom = plan_test_set(len(normals), len(anomalies), contamination, test_size)
    rng = make_rng(seed)
    normals = normals[rng.permutation(len(normals))]
    anomalies = anomalies[rng.permutation(len(anomalies))]
    idx = np.concatenate([normals[: size - n_anom], anomalies[:n_anom]])
    return idx[rng.permutation(len(idx))]


def write_encoded_csv(path, X: np.ndarray, is_anomalous: np.ndarray, ids) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "truth", *[f"f{j}" for j in range(X.shape[1])]])
        for sid, row, a in zip(ids, X, is_anomalous):
            w.writerow([int(sid), ANOMALOUS if a else NORMAL, *[repr(float(v)) for v in row]])


def read_encoded_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    ids = np.array([int(r[0]) for r in body], dtype=int)
    y = np.array([r[1] == ANOMALOUS for r in body], dtype=bool)
    X = np.array([[float(v) for v in r[2:]] for r in body]).reshape(len(body), len(rows[0]) - 2)
    return X, y, ids


def records_to_text(records: list[RawRecord]) -> str:
    buf = io.StringIO()
    for r in records:
        buf.write(",".join([*r.fields, r.label + "."]) + "\n")
    return buf.getvalue()
