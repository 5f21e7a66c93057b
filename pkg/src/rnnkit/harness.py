"""Benchmark pipeline: split, train, predict and score the classifiers."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .data import (EncodingConfig, check_counts, load_dataset, normalize_and_encode,
                   scale_features, stratified_split)
from .learning import TrainedModel, TrainingConfig, train
from .solver import SolverOptions, solve_fixed_point

log = logging.getLogger(__name__)

# Published RNN results, shown next to ours and never used in any computation.
# Row 0 of each binary matrix is the positive class (first entry of the schema's
# class order).
REFERENCE: dict[str, dict[str, Any]] = {
    "iris": {"accuracy": 1.0, "ann_accuracy": 0.959,
             "confusion": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]},
    "bcw": {"accuracy": 0.964, "ann_accuracy": 0.963,
            "confusion": [[0.984, 0.016], [0.067, 0.933]]},
    "glass": {"confusion": [[1.0, 0.0], [0.127, 0.8139]],
              "note": "published negative row sums to 0.9409, not 1"},
    "ovarian": {"confusion": [[1.0, 0.0], [0.1064, 0.8936]]},
}


@dataclass
class ConfusionMatrix:
    class_names: list[str]
    counts: np.ndarray  # raw counts, row = true class, column = predicted

    @classmethod
    def from_predictions(cls, labels, predictions, class_names) -> "ConfusionMatrix":
        n = len(class_names)
        counts = np.zeros((n, n), dtype=np.int64)
        np.add.at(counts, (np.asarray(labels, dtype=int), np.asarray(predictions, dtype=int)), 1)
        return cls(list(class_names), counts)

    @property
    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def rates(self) -> np.ndarray:
        """Row-normalized matrix; rows without support are all zero."""
        s = self.support[:, None].astype(float)
        return np.divide(self.counts, s, out=np.zeros(self.counts.shape), where=s > 0)

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else float("nan")

    def recall(self, k: int) -> float:
        return float(self.rates[k, k])

    def to_dict(self) -> dict:
        return {"class_names": self.class_names, "rates": self.rates.tolist(),
                "support": self.support.tolist()}


def predict(model: TrainedModel, input_rates) -> tuple[int, np.ndarray]:
    """Class index (argmax over output excitation, lowest index on ties) and output q."""
    x = np.asarray(input_rates, dtype=float)
    ins = list(model.roles.input_ids)
    if x.shape != (len(ins),):
        raise ValueError(f"expected {len(ins)} input rates, got shape {x.shape}")
    L = model.params.L
    Lam = np.zeros(L)
    Lam[ins] = x
    net = model.params.with_inputs(Lam, np.zeros(L))
    steady = solve_fixed_point(net, SolverOptions(tolerance=model.config.solver_tolerance,
                                                  allow_divergent=True))
    q_out = steady.q[list(model.roles.output_ids)]
    return int(np.argmax(q_out)), q_out


def predict_features(model: TrainedModel, features) -> tuple[int, np.ndarray]:
    """Predict from raw attribute values using the model's stored normalization."""
    if model.normalization is None:
        raise ValueError("model carries no normalization; pass encoded rates to predict()")
    return predict(model, scale_features(features, model.normalization))


@dataclass
class Evaluation:
    confusion: ConfusionMatrix
    predictions: np.ndarray

    @property
    def accuracy(self) -> float:
        return self.confusion.accuracy

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "confusion": self.confusion.to_dict()}


def evaluate(model: TrainedModel, inputs, labels, class_names=None) -> Evaluation:
    inputs = np.asarray(inputs, dtype=float)
    if len(inputs) == 0:
        raise ValueError("empty test set")
    preds = np.array([predict(model, x)[0] for x in inputs], dtype=int)
    names = list(class_names or model.class_names) or [str(i) for i in
                                                      range(len(model.roles.output_ids))]
    return Evaluation(ConfusionMatrix.from_predictions(labels, preds, names), preds)


@dataclass(frozen=True)
class BenchConfig:
    datasets: dict[str, TrainingConfig]
    master_seed: int = 0
    seeds: int = 10
    test_fraction: float = 0.2
    workers: int = 1

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "BenchConfig":
        known = {"datasets", "master_seed", "seeds", "test_fraction", "workers"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown bench config keys: {sorted(unknown)}")
        if not doc.get("datasets"):
            raise ValueError("bench config lists no datasets")
        datasets = {name: TrainingConfig.from_dict(cfg or {})
                    for name, cfg in doc["datasets"].items()}
        return cls(datasets, int(doc.get("master_seed", 0)), int(doc.get("seeds", 10)),
                   float(doc.get("test_fraction", 0.2)), int(doc.get("workers", 1)))

    @classmethod
    def load(cls, path) -> "BenchConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"master_seed": self.master_seed, "seeds": self.seeds,
                "test_fraction": self.test_fraction, "workers": self.workers,
                "datasets": {k: v.to_dict() for k, v in self.datasets.items()}}


def default_bench_config() -> BenchConfig:
    text = resources.files("rnnkit").joinpath("configs", "bench.json").read_text()
    return BenchConfig.from_dict(json.loads(text))


def seed_for(master_seed: int, i: int) -> int:
    return master_seed ^ i


def run_cell(name: str, config: TrainingConfig, seed: int, test_fraction: float,
             data_dir=None) -> dict[str, Any]:
    """One (dataset, seed) pipeline: split, encode, train, evaluate."""
    raw = load_dataset(name, data_dir)
    check_counts(raw, name)
    split = stratified_split(raw.labels, test_fraction, seed)
    ds = normalize_and_encode(raw, split, EncodingConfig(config.target_high, config.target_low))
    cfg = TrainingConfig.from_dict({**config.to_dict(), "seed": seed})
    model = train(ds.inputs[split.train], ds.targets[split.train], cfg, ds.class_names,
                  ds.normalization())
    test = evaluate(model, ds.inputs[split.test], ds.labels[split.test], ds.class_names)
    return {"seed": seed, "accuracy": test.accuracy,
            "confusion_counts": test.confusion.counts.tolist(),
            "final_error": model.history[-1] if model.history else None,
            "epochs_run": len(model.history)}


def _cell(args):
    name, config, seed, frac, data_dir = args
    start = time.perf_counter()
    try:
        out = run_cell(name, config, seed, frac, data_dir)
    except Exception as exc:  # reported per cell, the benchmark carries on
        out = {"seed": seed, "error": f"{type(exc).__name__}: {exc}"}
    return out, time.perf_counter() - start


def _summarize(name: str, config: TrainingConfig, cells: list[dict]) -> dict[str, Any]:
    entry: dict[str, Any] = {"config": config.to_dict(), "reference": REFERENCE.get(name)}
    failed = [c for c in cells if "error" in c]
    if failed:
        entry.update(status="failed", error=failed[0]["error"],
                     failed_seeds=[c["seed"] for c in failed])
        return entry
    acc = np.array([c["accuracy"] for c in cells])
    counts = np.array([c["confusion_counts"] for c in cells], dtype=float)
    # mean of the per-seed row-normalized matrices
    rates = counts / np.maximum(counts.sum(axis=2, keepdims=True), 1)
    entry.update(status="ok", mean_accuracy=float(acc.mean()), std_accuracy=float(acc.std()),
                 seeds=[c["seed"] for c in cells], accuracies=acc.tolist(),
                 confusion=rates.mean(axis=0).tolist(),
                 final_errors=[c["final_error"] for c in cells])
    return entry


def run_benchmark(config: BenchConfig, data_dir=None,
                  timings: dict[str, float] | None = None) -> dict[str, Any]:
    """Run every dataset of ``config`` over its seeds.

    The returned report depends only on the configuration and the data, so it
    serializes to identical bytes for identical inputs.  Wall-clock seconds per
    dataset go to ``timings`` when given.
    """
    jobs = [(name, cfg, seed_for(config.master_seed, i), config.test_fraction, data_dir)
            for name, cfg in config.datasets.items() for i in range(config.seeds)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            results = list(pool.map(_cell, jobs))
    else:
        results = [_cell(job) for job in jobs]
    report: dict[str, Any] = {"master_seed": config.master_seed, "seeds": config.seeds,
                              "test_fraction": config.test_fraction, "datasets": {}}
    for name, cfg in config.datasets.items():
        mine = [(cell, sec) for job, (cell, sec) in zip(jobs, results) if job[0] == name]
        report["datasets"][name] = _summarize(name, cfg, [c for c, _ in mine])
        if timings is not None:
            timings[name] = sum(s for _, s in mine)
        log.info("%s done", name)
    return report


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def format_table(report: dict, timings: dict[str, float] | None = None) -> str:
    """Aligned text summary of a benchmark report."""
    lines = [f"{'dataset':<10}{'status':<8}{'accuracy':>10}{'std':>8}{'published':>11}"
             f"{'seconds':>9}"]
    for name, e in report["datasets"].items():
        ref = (e.get("reference") or {}).get("accuracy")
        ref_s = f"{ref:.3f}" if ref is not None else "-"
        sec = f"{timings[name]:.1f}" if timings and name in timings else "-"
        if e["status"] != "ok":
            lines.append(f"{name:<10}{'failed':<8}{'-':>10}{'-':>8}{ref_s:>11}{sec:>9}"
                         f"  {e['error']}")
            continue
        lines.append(f"{name:<10}{'ok':<8}{e['mean_accuracy']:>10.3f}{e['std_accuracy']:>8.3f}"
                     f"{ref_s:>11}{sec:>9}")
    for name, e in report["datasets"].items():
        if e["status"] != "ok":
            continue
        names = e["config"] and _class_names(name)
        lines.append("")
        lines.append(f"{name}: mean confusion matrix (rows true, columns predicted)")
        ref = (e.get("reference") or {}).get("confusion")
        for k, row in enumerate(e["confusion"]):
            label = names[k] if names and k < len(names) else str(k)
            cells = " ".join(f"{v:6.3f}" for v in row)
            pub = ("   published " + " ".join(f"{v:6.4g}" for v in ref[k])) if ref else ""
            lines.append(f"  {label:<12}{cells}{pub}")
        note = (e.get("reference") or {}).get("note")
        if note:
            lines.append(f"  note: {note}")
    return "\n".join(lines) + "\n"


def _class_names(name: str) -> list[str] | None:
    from .data import builtin_schema

    try:
        return list(builtin_schema(name).class_order)
    except FileNotFoundError:
        return None
