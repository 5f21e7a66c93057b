"""Download or convert the benchmark datasets into canonical CSV files.

Each dataset is written as ``<name>.csv`` with a header row of attribute
names followed by a ``class`` column, plus the matching ``<name>.schema.json``.
Raw files are taken from ``source_dir`` when present there, otherwise
downloaded.  Several raw layouts are understood per dataset: the UCI
originals and the copies redistributed with R's ``datasets``/``MASS``
packages and the KEEL repository.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .data import builtin_schema

log = logging.getLogger(__name__)

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"

IRIS_ATTRS = ["sepal_length", "sepal_width", "petal_length", "petal_width"]
BCW_ATTRS = ["clump_thickness", "cell_size_uniformity", "cell_shape_uniformity",
             "marginal_adhesion", "single_epithelial_cell_size", "bare_nuclei",
             "bland_chromatin", "normal_nucleoli", "mitoses"]
GLASS_ATTRS = ["RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe"]
IRIS_LABELS = {
    "Iris-setosa": "Setosa", "setosa": "Setosa",
    "Iris-versicolor": "Versicolour", "versicolor": "Versicolour",
    "Iris-virginica": "Virginica", "virginica": "Virginica",
}

Rows = list[tuple[list[str], str]]


class FetchError(RuntimeError):
    pass


def _text(raw: bytes) -> list[list[str]]:
    lines = [ln for ln in raw.decode("utf-8").splitlines() if ln.strip() and not ln.startswith("@")]
    return [[c.strip() for c in row] for row in csv.reader(io.StringIO("\n".join(lines)))]


def _iris_uci(raw: bytes) -> Rows:
    return [(row[:4], IRIS_LABELS[row[4]]) for row in _text(raw)]


def _iris_r(raw: bytes) -> Rows:
    return [(row[1:5], IRIS_LABELS[row[5]]) for row in _text(raw)[1:]]


def _bcw_uci(raw: bytes) -> Rows:
    return [(row[1:10], {"2": "benign", "4": "malignant"}[row[10]]) for row in _text(raw)]


def _bcw_mass(raw: bytes) -> Rows:
    return [([("?" if c == "NA" else c) for c in row[2:11]], row[11]) for row in _text(raw)[1:]]


def _glass_uci(raw: bytes) -> Rows:
    # types 1-4 are window glass (4 is absent from the data), 5-7 are not
    return [(row[1:10], "window" if int(row[10]) <= 4 else "non-window") for row in _text(raw)]


def _glass_keel(raw: bytes) -> Rows:
    # KEEL's "0-1-2-3 vs 4-5-6" grouping: negative = window types
    mapping = {"negative": "window", "positive": "non-window"}
    return [(row[:9], mapping[row[9]]) for row in _text(raw)]


def _ovarian_mat(raw: bytes) -> Rows:
    from scipy.io import loadmat

    mat = loadmat(io.BytesIO(raw))
    x = mat["ovarianInputs"]
    t = mat["ovarianTargets"]
    # the target row with 121 positives marks the cancer patients
    cancer_row = int(t.sum(axis=1).argmax() if t.sum(axis=1).max() == 121 else 0)
    return [([repr(float(v)) for v in x[:, k]],
             "cancer" if t[cancer_row, k] > 0.5 else "normal") for k in range(x.shape[1])]


def _ovarian_csv(raw: bytes) -> Rows:
    rows = _text(raw)
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    return [(row[:100], row[100]) for row in rows]


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


@dataclass(frozen=True)
class RawSource:
    filename: str
    convert: Callable[[bytes], Rows]
    url: str | None = None
    sha256: str | None = None


SOURCES: dict[str, list[RawSource]] = {
    "iris": [
        RawSource("iris.data", _iris_uci, f"{UCI}/iris/iris.data"),
        RawSource("iris.csv", _iris_r,
                  sha256="396c921bc9cf625a4ab755540084aa3d0d941c4ffed8681299689b1f502c3ac2"),
    ],
    "bcw": [
        RawSource("breast-cancer-wisconsin.data", _bcw_uci,
                  f"{UCI}/breast-cancer-wisconsin/breast-cancer-wisconsin.data"),
        RawSource("biopsy.csv", _bcw_mass,
                  sha256="6ed32fbab327224ec749cacbc1e4750114aae622dc651d522043b6cf0d735b7e"),
    ],
    "glass": [
        RawSource("glass.data", _glass_uci, f"{UCI}/glass/glass.data"),
        RawSource("glass-0-1-2-3_vs_4-5-6.dat", _glass_keel,
                  sha256="f1dbba9cca2ceb40b51caa1c4de41ba66d36d5a94460fb5174988ef3c6513f2a"),
    ],
    "ovarian": [
        RawSource("ovarian_dataset.mat", _ovarian_mat),
        RawSource("ovarian.csv", _ovarian_csv),
    ],
}
ATTRIBUTES = {
    "iris": IRIS_ATTRS,
    "bcw": BCW_ATTRS,
    "glass": GLASS_ATTRS,
    "ovarian": [f"mz_{i:03d}" for i in range(100)],
}


def _obtain(name: str, source_dir: Path | None, download: bool) -> tuple[RawSource, bytes]:
    for src in SOURCES[name]:
        if source_dir is not None and (source_dir / src.filename).exists():
            return src, (source_dir / src.filename).read_bytes()
    if download:
        for src in SOURCES[name]:
            if src.url is None:
                continue
            log.info("downloading %s", src.url)
            try:
                with urllib.request.urlopen(src.url, timeout=60) as resp:
                    return src, resp.read()
            except OSError as exc:
                log.warning("download of %s failed: %s", src.url, exc)
    names = ", ".join(s.filename for s in SOURCES[name])
    raise FetchError(f"{name}: no raw file found (looked for {names}) and no download succeeded")


def fetch_dataset(name: str, dest: Path, source_dir: Path | None = None,
                  download: bool = True) -> dict:
    """Produce ``dest/<name>.csv``; returns a small provenance record."""
    src, raw = _obtain(name, source_dir, download)
    digest = hashlib.sha256(raw).hexdigest()
    if src.sha256 is not None and digest != src.sha256:
        raise FetchError(f"{name}: checksum mismatch for {src.filename}: {digest}")
    verified = src.sha256 is not None
    if not verified:
        log.warning("%s: no recorded checksum for %s (sha256 %s)", name, src.filename, digest)
    rows = _convert(name, src, raw)
    dest.mkdir(parents=True, exist_ok=True)
    schema = builtin_schema(name)
    with (dest / f"{name}.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ATTRIBUTES[name] + [schema.label_column])
        for feats, label in rows:
            w.writerow(list(feats) + [label])
    (dest / f"{name}.schema.json").write_text(json.dumps(schema.to_dict(), indent=2) + "\n")
    return {"dataset": name, "source": src.filename, "sha256": digest,
            "checksum_verified": verified, "rows": len(rows)}


def _convert(name: str, src: RawSource, raw: bytes) -> Rows:
    try:
        rows = src.convert(raw)
    except (KeyError, IndexError, ValueError) as exc:
        raise FetchError(f"{name}: cannot parse {src.filename}: {exc!r}") from exc
    width = len(ATTRIBUTES[name])
    for i, (feats, _) in enumerate(rows):
        if len(feats) != width:
            raise FetchError(f"{name}: row {i} of {src.filename} has {len(feats)} attributes")
    return rows
