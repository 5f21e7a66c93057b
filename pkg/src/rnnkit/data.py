"""Dataset loading, rate encoding and stratified splitting."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

RATE_LOW = 0.1
RATE_HIGH = 1.0

# instance / attribute / class counts of the benchmark files as distributed;
# glass is graded as the window / non-window grouping, hence 2 classes
EXPECTED_COUNTS = {
    "iris": {"rows": 150, "attributes": 4, "classes": 3},
    "bcw": {"rows": 699, "attributes": 9, "classes": 2},
    "glass": {"rows": 214, "attributes": 9, "classes": 2},
    "ovarian": {"rows": 216, "attributes": 100, "classes": 2},
}
DATASETS = tuple(EXPECTED_COUNTS)
# class sizes that must hold at load time (before any row filtering)
EXPECTED_CLASS_COUNTS = {"ovarian": {"cancer": 121, "normal": 95}}


class DataError(ValueError):
    pass


def data_dir() -> Path:
    """Dataset cache directory (``$RNN_DATA_DIR`` or ``~/.cache/rnnkit``)."""
    env = os.environ.get("RNN_DATA_DIR")
    return Path(env) if env else Path.home() / ".cache" / "rnnkit"


@dataclass(frozen=True)
class Schema:
    label_column: str | int
    missing_token: str | None = None
    class_order: tuple[str, ...] = ()
    header: bool = True
    name: str = ""

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Schema":
        known = {"label_column", "missing_token", "class_order", "header", "name"}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown schema keys: {sorted(unknown)}")
        return cls(d["label_column"], d.get("missing_token"),
                   tuple(d.get("class_order", ())), bool(d.get("header", True)),
                   d.get("name", ""))

    @classmethod
    def load(cls, path) -> "Schema":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "label_column": self.label_column,
                "missing_token": self.missing_token, "class_order": list(self.class_order),
                "header": self.header}


def builtin_schema(name: str) -> Schema:
    text = resources.files("rnnkit").joinpath("schemas", f"{name}.json").read_text()
    return Schema.from_dict(json.loads(text))


@dataclass
class RawDataset:
    name: str
    features: np.ndarray
    labels: np.ndarray  # class indices into class_names
    class_names: list[str]
    attribute_names: list[str]
    raw_row_count: int
    dropped_rows: int = 0

    @property
    def attribute_count(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> dict[str, int]:
        counts = np.bincount(self.labels, minlength=len(self.class_names))
        return dict(zip(self.class_names, counts.tolist()))


def load_csv(path, schema: Schema) -> RawDataset:
    """Parse a comma-separated file; rows holding the missing token are dropped."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    start = 1 if schema.header else 0
    if schema.header:
        header = [h.strip() for h in rows[0]]
    else:
        header = [f"x{i}" for i in range(len(rows[0]))]
    if isinstance(schema.label_column, int):
        label_at = schema.label_column
    else:
        try:
            label_at = header.index(schema.label_column)
        except ValueError:
            raise DataError(f"{path}: no label column {schema.label_column!r}") from None
    attribute_names = [h for i, h in enumerate(header) if i != label_at]
    class_names = list(schema.class_order)
    feats, labels = [], []
    raw_count = dropped = 0
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not c.strip() for c in row):
            continue
        raw_count += 1
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        cells = [c.strip() for c in row]
        if schema.missing_token is not None and schema.missing_token in cells:
            dropped += 1
            continue
        label = cells[label_at]
        if label not in class_names:
            if schema.class_order:
                raise DataError(f"{path}:{lineno}: unknown label {label!r}")
            class_names.append(label)
        try:
            values = [float(c) for i, c in enumerate(cells) if i != label_at]
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
        feats.append(values)
        labels.append(class_names.index(label))
    if not class_names:
        raise DataError(f"{path}: no classes")
    return RawDataset(schema.name or path.stem, np.array(feats, dtype=float).reshape(
        len(feats), len(attribute_names)), np.array(labels, dtype=int), class_names,
        attribute_names, raw_count, dropped)


def load_dataset(name: str, directory=None) -> RawDataset:
    """Load one of the canonical benchmark files from the dataset cache."""
    directory = Path(directory) if directory is not None else data_dir()
    path = directory / f"{name}.csv"
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `rnn fetch-data` first")
    local = directory / f"{name}.schema.json"
    schema = Schema.load(local) if local.exists() else builtin_schema(name)
    return load_csv(path, schema)


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    test: np.ndarray


def stratified_split(labels, test_fraction: float, seed: int) -> Split:
    """Seeded per-class split; each class contributes ``round(n_c * test_fraction)`` test rows."""
    if isinstance(labels, RawDataset):
        labels = labels.labels
    labels = np.asarray(labels)
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            raise DataError(f"class {c} has fewer than 2 samples")
        n_test = min(max(int(round(idx.size * test_fraction)), 1), idx.size - 1)
        perm = rng.permutation(idx)
        test.append(perm[:n_test])
        train.append(perm[n_test:])
    return Split(np.sort(np.concatenate(train)), np.sort(np.concatenate(test)))


@dataclass(frozen=True)
class EncodingConfig:
    target_high: float = 0.9
    target_low: float = 0.1
    rate_low: float = RATE_LOW
    rate_high: float = RATE_HIGH


@dataclass
class LabeledDataset:
    inputs: np.ndarray
    targets: np.ndarray
    labels: np.ndarray
    class_names: list[str]
    train_idx: np.ndarray
    test_idx: np.ndarray
    feature_min: np.ndarray
    feature_max: np.ndarray
    encoding: EncodingConfig = field(default_factory=EncodingConfig)

    def normalization(self) -> dict[str, Any]:
        return {"min": self.feature_min.tolist(), "max": self.feature_max.tolist(),
                "rate_low": self.encoding.rate_low, "rate_high": self.encoding.rate_high}

    def denormalize(self, rates) -> np.ndarray:
        return denormalize(rates, self.normalization())


def scale_features(x, normalization: dict[str, Any]) -> np.ndarray:
    """Affine map of raw features into ``[rate_low, rate_high]``, clamped.

    Constant attributes (``min == max``) map to the midpoint of the range.
    """
    lo_r, hi_r = normalization["rate_low"], normalization["rate_high"]
    fmin = np.asarray(normalization["min"], dtype=float)
    fmax = np.asarray(normalization["max"], dtype=float)
    x = np.asarray(x, dtype=float)
    span = fmax - fmin
    flat = span <= 0
    unit = np.divide(x - fmin, span, out=np.zeros(np.broadcast(x, span).shape),
                     where=~flat)
    out = lo_r + (hi_r - lo_r) * np.clip(unit, 0.0, 1.0)
    return np.where(flat, 0.5 * (lo_r + hi_r), out)


def denormalize(rates, normalization: dict[str, Any]) -> np.ndarray:
    lo_r, hi_r = normalization["rate_low"], normalization["rate_high"]
    fmin = np.asarray(normalization["min"], dtype=float)
    fmax = np.asarray(normalization["max"], dtype=float)
    return fmin + (np.asarray(rates, dtype=float) - lo_r) / (hi_r - lo_r) * (fmax - fmin)


def encode_targets(labels, n_classes: int, high: float = 0.9, low: float = 0.1) -> np.ndarray:
    t = np.full((len(labels), n_classes), low)
    t[np.arange(len(labels)), np.asarray(labels, dtype=int)] = high
    return t


def normalize_and_encode(raw: RawDataset, split: Split | None = None,
                         encoding: EncodingConfig | None = None) -> LabeledDataset:
    """Rate-encode features with train-split min/max and one-hot encode the labels.

    Without a split every row counts as training data.
    """
    encoding = encoding or EncodingConfig()
    n = len(raw.labels)
    if split is None:
        split = Split(np.arange(n), np.array([], dtype=int))
    train_feats = raw.features[split.train]
    fmin, fmax = train_feats.min(axis=0), train_feats.max(axis=0)
    norm = {"min": fmin, "max": fmax, "rate_low": encoding.rate_low,
            "rate_high": encoding.rate_high}
    inputs = scale_features(raw.features, norm)
    targets = encode_targets(raw.labels, len(raw.class_names), encoding.target_high,
                             encoding.target_low)
    return LabeledDataset(inputs, targets, raw.labels.copy(), list(raw.class_names),
                          split.train, split.test, fmin, fmax, encoding)


def counts_match_table1(raw: RawDataset, name: str | None = None) -> bool:
    ref = EXPECTED_COUNTS[name or raw.name]
    return (raw.raw_row_count == ref["rows"] and raw.attribute_count == ref["attributes"]
            and len(raw.class_names) == ref["classes"])


def check_counts(raw: RawDataset, name: str | None = None) -> None:
    """Raise :class:`DataError` unless the file has the expected shape and class sizes."""
    name = name or raw.name
    if name not in EXPECTED_COUNTS:
        return
    if not counts_match_table1(raw, name):
        ref = EXPECTED_COUNTS[name]
        raise DataError(f"{name}: expected {ref['rows']} rows / {ref['attributes']} attributes / "
                        f"{ref['classes']} classes, found {raw.raw_row_count} / "
                        f"{raw.attribute_count} / {len(raw.class_names)}")
    expected = EXPECTED_CLASS_COUNTS.get(name)
    if expected is not None and raw.dropped_rows == 0 and raw.class_counts() != expected:
        raise DataError(f"{name}: class sizes {raw.class_counts()} differ from {expected}")


def class_histogram(labels: Sequence[int], n_classes: int) -> list[int]:
    return np.bincount(np.asarray(labels, dtype=int), minlength=n_classes).tolist()
