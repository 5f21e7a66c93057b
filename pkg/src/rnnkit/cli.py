"""Command-line entry point ``rnn``.

Exit codes: 0 success, 1 domain error (no convergence, invalid model, bad
data, failed check), 2 usage error (bad flags, missing files).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from .fetch import FetchError, fetch_dataset
from .harness import (BenchConfig, default_bench_config, dumps_report, evaluate, format_table,
                      run_benchmark)
from .learning import TrainedModel, TrainingConfig, TrainingError, gradcheck, train
from .model import InconsistentParametersError, RnnParameters, load_model, validate
from .simulator import SimulationError, compare_product_form, simulate
from .solver import ConvergenceError, IllPosedNeuronError, SolverOptions, solve_fixed_point

log = logging.getLogger("rnnkit")

DOMAIN_ERRORS = (ConvergenceError, IllPosedNeuronError, InconsistentParametersError,
                 SimulationError, TrainingError, data_mod.DataError, FetchError)


class UsageError(Exception):
    pass


def _existing(path: str | None, what: str) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} {p} does not exist")
    return p


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_params(path: str) -> tuple[RnnParameters, dict]:
    params, _, doc = load_model(_existing(path, "model file"))
    problems = validate(params)
    if problems:
        raise InconsistentParametersError("invalid model: " + "; ".join(problems))
    return params, doc


def _solver_options(args) -> SolverOptions:
    return SolverOptions(tolerance=args.tolerance, max_iterations=args.max_iterations,
                         damping=args.damping, allow_divergent=args.allow_divergent)


def cmd_solve(args) -> int:
    params, _ = _load_params(args.model)
    steady = solve_fixed_point(params, _solver_options(args))
    _emit(steady.to_dict(), args.out)
    return 0


def cmd_simulate(args) -> int:
    params, _ = _load_params(args.model)
    report = simulate(params, args.horizon, args.seed, collect_joint=args.joint,
                      k_max=args.k_max, potential_cap=args.cap)
    doc = report.to_dict()
    try:
        steady = solve_fixed_point(params)
    except (ConvergenceError, IllPosedNeuronError) as exc:
        log.warning("no analytical comparison: %s", exc)
    else:
        doc["solver_q"] = steady.q.tolist()
        if not steady.saturated:
            doc["product_form"] = compare_product_form(report, steady).to_dict()
    _emit(doc, args.out)
    return 0


def _schema_for(csv_path: Path, schema_arg: str | None) -> data_mod.Schema:
    if schema_arg:
        return data_mod.Schema.load(_existing(schema_arg, "schema file"))
    sibling = csv_path.with_suffix(".schema.json")
    if sibling.exists():
        return data_mod.Schema.load(sibling)
    try:
        return data_mod.builtin_schema(csv_path.stem)
    except FileNotFoundError:
        return data_mod.Schema(label_column="class", name=csv_path.stem)


def cmd_train(args) -> int:
    csv_path = _existing(args.data, "data file")
    raw = data_mod.load_csv(csv_path, _schema_for(csv_path, args.schema))
    doc = json.loads(_existing(args.config, "config file").read_text()) if args.config else {}
    try:
        config = TrainingConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad training config: {exc}") from None
    if args.seed is not None:
        config = TrainingConfig.from_dict({**config.to_dict(), "seed": args.seed})
    split = None
    if args.test_fraction:
        split = data_mod.stratified_split(raw.labels, args.test_fraction, config.seed)
    enc = data_mod.EncodingConfig(config.target_high, config.target_low)
    ds = data_mod.normalize_and_encode(raw, split, enc)
    model = train(ds.inputs[ds.train_idx], ds.targets[ds.train_idx], config, ds.class_names,
                  ds.normalization())
    out = model.to_dict()
    summary = {"epochs_run": len(model.history),
               "final_error": model.history[-1] if model.history else None}
    if split is not None:
        ev = evaluate(model, ds.inputs[split.test], ds.labels[split.test])
        out["test"] = {"indices": split.test.tolist(), **ev.to_dict()}
        summary["test_accuracy"] = ev.accuracy
    Path(args.out).write_text(json.dumps(out, indent=2) + "\n")
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return 0


def cmd_eval(args) -> int:
    path = _existing(args.model, "model file")
    try:
        model = TrainedModel.from_dict(json.loads(path.read_text()))
    except (KeyError, ValueError) as exc:
        raise InconsistentParametersError(f"invalid model: {exc}") from None
    problems = validate(model.params)
    if problems:
        raise InconsistentParametersError("invalid model: " + "; ".join(problems))
    if model.normalization is None:
        raise InconsistentParametersError("model has no feature normalization")
    csv_path = _existing(args.data, "data file")
    raw = data_mod.load_csv(csv_path, _schema_for(csv_path, args.schema))
    if model.class_names and raw.class_names != model.class_names:
        raise data_mod.DataError(f"data classes {raw.class_names} differ from the model's "
                                 f"{model.class_names}")
    rates = data_mod.scale_features(raw.features, model.normalization)
    _emit(evaluate(model, rates, raw.labels, raw.class_names).to_dict(), args.out)
    return 0


def cmd_gradcheck(args) -> int:
    result = gradcheck(args.seed, args.trials, args.max_size)
    result["tolerance"] = args.tolerance
    result["passed"] = result["max_relative_error"] <= args.tolerance
    del result["errors"]
    _emit(result, args.out)
    return 0 if result["passed"] else 1


def cmd_bench(args) -> int:
    config = (BenchConfig.load(_existing(args.config, "bench config")) if args.config
              else default_bench_config())
    if args.seed is not None:
        config = BenchConfig(config.datasets, args.seed, config.seeds, config.test_fraction,
                             config.workers)
    if args.datasets:
        unknown = set(args.datasets) - set(config.datasets)
        if unknown:
            raise UsageError(f"datasets not in the config: {sorted(unknown)}")
        config = BenchConfig({k: config.datasets[k] for k in args.datasets}, config.master_seed,
                             config.seeds, config.test_fraction, config.workers)
    timings: dict[str, float] = {}
    report = run_benchmark(config, args.data_dir, timings)
    text = dumps_report(report)
    if args.out:
        Path(args.out).write_text(text)
        sys.stdout.write(format_table(report, timings))
    else:
        sys.stdout.write(text)
        sys.stderr.write(format_table(report, timings))
    return 0


def cmd_fetch(args) -> int:
    dest = Path(args.dest) if args.dest else data_mod.data_dir()
    source = _existing(args.source_dir, "source directory")
    failed = False
    for name in args.datasets or data_mod.DATASETS:
        try:
            info = fetch_dataset(name, dest, source, download=not args.no_download)
        except FetchError as exc:
            log.error("%s", exc)
            failed = True
            continue
        sys.stdout.write(json.dumps(info) + "\n")
    return 1 if failed else 0


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tolerance", type=float, default=1e-12,
                   help="max-norm stopping tolerance (default: %(default)s)")
    p.add_argument("--max-iterations", type=int, default=10_000,
                   help="iteration budget (default: %(default)s)")
    p.add_argument("--damping", type=float, default=1.0,
                   help="relaxation factor in (0, 1] (default: %(default)s)")
    p.add_argument("--allow-divergent", action="store_true",
                   help="treat neurons with excitation but no outflow as saturated")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rnn", description="Random neural network toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("solve", help="solve a model for its excitation probabilities")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--out", help="write JSON here instead of standard output")
    _solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="simulate the spiking dynamics of a model")
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--horizon", type=float, required=True, help="simulated time")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    p.add_argument("--joint", action="store_true",
                   help="collect the joint occupancy histogram (at most 4 neurons)")
    p.add_argument("--k-max", type=int, default=10,
                   help="histogram truncation per neuron (default: %(default)s)")
    p.add_argument("--cap", type=int, default=10**6,
                   help="abort when a potential exceeds this (default: %(default)s)")
    p.add_argument("--out", help="write JSON here instead of standard output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a classifier on a CSV file")
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--schema", help="schema JSON (default: <data>.schema.json or built-in)")
    p.add_argument("--config", help="training config JSON")
    p.add_argument("--out", required=True, help="output model JSON")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--test-fraction", type=float, default=0.0,
                   help="hold out a stratified test split and report its accuracy")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained model on a CSV file")
    p.add_argument("--model", required=True, help="trained model JSON")
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--schema", help="schema JSON (default: <data>.schema.json or built-in)")
    p.add_argument("--out", help="write JSON here instead of standard output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="check analytic against numerical gradients")
    p.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    p.add_argument("--trials", type=int, default=100,
                   help="number of random networks (default: %(default)s)")
    p.add_argument("--max-size", type=int, default=6,
                   help="largest network size (default: %(default)s)")
    p.add_argument("--tolerance", type=float, default=1e-5,
                   help="pass threshold on relative error (default: %(default)s)")
    p.add_argument("--out", help="write JSON here instead of standard output")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("bench", help="run the dataset benchmark")
    p.add_argument("--config", help="bench config JSON (default: the bundled one)")
    p.add_argument("--out", help="write the JSON report here; the table goes to standard output")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--data-dir", help="dataset directory (default: $RNN_DATA_DIR or cache)")
    p.add_argument("--datasets", nargs="+", metavar="NAME", help="subset of datasets to run")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fetch-data", help="download or convert the benchmark datasets")
    p.add_argument("datasets", nargs="*", metavar="NAME",
                   help=f"datasets to fetch (default: all of {', '.join(data_mod.DATASETS)})")
    p.add_argument("--dest", help="output directory (default: $RNN_DATA_DIR or cache)")
    p.add_argument("--source-dir", help="directory holding already downloaded raw files")
    p.add_argument("--no-download", action="store_true", help="never touch the network")
    p.set_defaults(func=cmd_fetch)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "datasets", None) and args.func is cmd_fetch:
        unknown = set(args.datasets) - set(data_mod.DATASETS)
        if unknown:
            parser.error(f"unknown datasets: {sorted(unknown)}")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rnn: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"rnn: error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"rnn: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, np.linalg.LinAlgError) as exc:
        print(f"rnn: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
