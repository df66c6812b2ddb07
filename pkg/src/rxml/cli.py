"""Command-line interface: train, predict, eval, sweep, selftest.

Exit codes: 0 on success, 1 on runtime failure (including failed self-test
checks), 2 on usage errors such as bad flag values or missing input paths.
Output is byte-deterministic for fixed inputs and seeds, except for a single
wall-time line per report.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time

from .dataio import load_model, load_xmc_file, save_model
from .errors import RxmlError
from .local_embedding import AdmmConfig
from .metrics import evaluate
from .pipeline import TrainConfig, default_hyperparameters, predict, train
from .selftest import run_selftest

TRAIN_REPORT_NAME = "train_report.txt"


class UsageError(Exception):
    """Bad invocation detected after argument parsing; maps to exit code 2."""


def _int_at_least(minimum, what):
    def parse(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{what} must be an integer, got {text!r}")
        if value < minimum:
            raise argparse.ArgumentTypeError(f"{what} must be >= {minimum}, got {value}")
        return value

    return parse


def _float_bound(minimum, what, strict):
    def parse(text):
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{what} must be a number, got {text!r}")
        if value < minimum or (strict and value == minimum):
            op = ">" if strict else ">="
            raise argparse.ArgumentTypeError(f"{what} must be {op} {minimum}, got {value}")
        return value

    return parse


def _cutoff_list(text):
    try:
        ks = tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"cutoffs must be comma-separated integers, got {text!r}"
        )
    if not ks or any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError(f"cutoffs must be positive, got {text!r}")
    return ks


def _int_list(text):
    try:
        values = tuple(int(tok) for tok in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"values must be comma-separated integers, got {text!r}"
        )
    if not values:
        raise argparse.ArgumentTypeError("values must be non-empty")
    return values


def _add_data_flags(parser):
    parser.add_argument(
        "--one-based", action="store_true", help="indices in data files start at 1"
    )
    parser.add_argument(
        "--normalize", action="store_true", help="scale feature rows to unit length"
    )


def _add_hyper_flags(parser):
    parser.add_argument(
        "--r", type=_int_at_least(1, "--r"), default=None, help="embedding rank"
    )
    parser.add_argument(
        "--clusters",
        type=_int_at_least(1, "--clusters"),
        default=None,
        help="partitions per learner",
    )
    parser.add_argument(
        "--learners", type=_int_at_least(1, "--learners"), default=None, help="ensemble size"
    )
    parser.add_argument(
        "--nbar",
        type=_int_at_least(1, "--nbar"),
        default=None,
        help="neighbors per row for Gram targets and scoring",
    )
    parser.add_argument(
        "--lambda",
        dest="lam",
        type=_float_bound(0.0, "--lambda", strict=True),
        default=0.1,
        help="regressor ridge weight",
    )
    parser.add_argument(
        "--mu",
        type=_float_bound(0.0, "--mu", strict=False),
        default=0.01,
        help="regressor sparsity weight (0 disables)",
    )
    parser.add_argument(
        "--rho",
        type=_float_bound(0.0, "--rho", strict=True),
        default=1.0,
        help="regressor splitting weight",
    )
    parser.add_argument(
        "--max-iters",
        type=_int_at_least(0, "--max-iters"),
        default=None,
        help="embedding solver iteration cap",
    )
    parser.add_argument("--solver", choices=("rcg", "svp"), default="rcg")
    parser.add_argument("--seed", type=_int_at_least(0, "--seed"), default=0)


def _add_threads_flag(parser):
    parser.add_argument(
        "--threads",
        type=_int_at_least(1, "--threads"),
        default=None,
        help="worker threads (default: RXML_THREADS, else all available cores)",
    )


def _resolve_threads(value):
    if value is not None:
        return value
    env = os.environ.get("RXML_THREADS", "").strip()
    if env:
        try:
            parsed = int(env)
        except ValueError:
            raise UsageError(f"RXML_THREADS must be an integer, got {env!r}")
        if parsed < 1:
            raise UsageError(f"RXML_THREADS must be >= 1, got {parsed}")
        return parsed
    return os.cpu_count() or 1


def _load_data(path, args):
    return load_xmc_file(path, one_based=args.one_based, l2_normalize=args.normalize)


def _config_from_args(args, n):
    base = default_hyperparameters(n)
    rcg = base.rcg
    if args.max_iters is not None:
        rcg = dataclasses.replace(rcg, max_iters=args.max_iters)
    return TrainConfig(
        n_clusters=args.clusters if args.clusters is not None else base.n_clusters,
        embedding_dim=args.r if args.r is not None else base.embedding_dim,
        num_learners=args.learners if args.learners is not None else base.num_learners,
        n_neighbors=args.nbar if args.nbar is not None else base.n_neighbors,
        embedding_solver=args.solver,
        seed=args.seed,
        rcg=rcg,
        admm=AdmmConfig(lam=args.lam, mu=args.mu, rho=args.rho),
    )


def cmd_train(args):
    threads = _resolve_threads(args.threads)
    data = _load_data(args.data, args)
    cfg = _config_from_args(args, data.n)
    model = train(data, cfg, n_threads=threads)
    save_model(model, args.out)
    report = model.report
    report_path = os.path.join(args.out, TRAIN_REPORT_NAME)
    with open(report_path, "w", encoding="utf-8") as fh:
        for line in report.trace_lines():
            fh.write(line + "\n")
        fh.write(f"wall_seconds={report.wall_seconds:.3f}\n")
    for line in report.summary_lines():
        print(line)
    print(f"model_dir={args.out}")
    print(f"wall_seconds={report.wall_seconds:.3f}")
    return 0


def _require_model_dir(path):
    if not os.path.isdir(path):
        raise UsageError(f"model directory not found: {path}")


def cmd_eval(args):
    _require_model_dir(args.model)
    model = load_model(args.model)
    data = _load_data(args.data, args)
    report = evaluate(model, data, args.k)
    print(report.to_text())
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(report.to_csv())
    return 0


def cmd_predict(args):
    _require_model_dir(args.model)
    model = load_model(args.model)
    data = _load_data(args.data, args)
    indices, scores = predict(model, data.X, p=args.k)
    lines = (
        " ".join(f"{indices[i, j]}:{scores[i, j]:.6g}" for j in range(args.k))
        for i in range(indices.shape[0])
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")
    else:
        for line in lines:
            print(line)
    return 0


_SWEEP_FIELDS = {"r": "embedding_dim", "learners": "num_learners", "clusters": "n_clusters"}


def _apply_sweep(cfg, param, value):
    if param == "maxit":
        return dataclasses.replace(cfg, rcg=dataclasses.replace(cfg.rcg, max_iters=value))
    return dataclasses.replace(cfg, **{_SWEEP_FIELDS[param]: value})


def cmd_sweep(args):
    threads = _resolve_threads(args.threads)
    floor = 0 if args.param == "maxit" else 1
    for value in args.values:
        if value < floor:
            raise UsageError(f"--values entries for {args.param} must be >= {floor}")
    train_data = _load_data(args.data, args)
    test_data = _load_data(args.test, args)
    start = time.perf_counter()
    base_cfg = _config_from_args(args, train_data.n)
    rows = ["param,value,p_at_1"]
    for value in args.values:
        cfg = _apply_sweep(base_cfg, args.param, value)
        model = train(train_data, cfg, n_threads=threads)
        report = evaluate(model, test_data, (1,))
        rows.append(f"{args.param},{value},{report.values[('precision', 1)]:.10g}")
    print("\n".join(rows))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("\n".join(rows) + "\n")
    print(f"wall_seconds={time.perf_counter() - start:.3f}", file=sys.stderr)
    return 0


def cmd_selftest(args):
    _, failed = run_selftest(name_filter=args.filter)
    return 1 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rxml",
        description="Clustered low-rank embedding ensembles for multi-label ranking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and save it to a directory")
    p_train.add_argument("--data", required=True, help="training file in sparse text format")
    _add_hyper_flags(p_train)
    p_train.add_argument("--out", default="rxml_model", help="output model directory")
    _add_threads_flag(p_train)
    _add_data_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a saved model against labeled data")
    p_eval.add_argument("--model", required=True, help="model directory written by train")
    p_eval.add_argument("--data", required=True, help="labeled test file")
    p_eval.add_argument(
        "--k", type=_cutoff_list, default=(1, 3, 5), help="comma-separated ranking cutoffs"
    )
    p_eval.add_argument("--csv", default=None, help="also write metric,k,value rows here")
    _add_data_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_pred = sub.add_parser("predict", help="rank labels for every row of a dataset")
    p_pred.add_argument("--model", required=True, help="model directory written by train")
    p_pred.add_argument("--data", required=True, help="feature file (labels ignored)")
    p_pred.add_argument(
        "--k", type=_int_at_least(1, "--k"), default=5, help="ranking depth per row"
    )
    p_pred.add_argument("--out", default=None, help="write rankings here instead of stdout")
    _add_data_flags(p_pred)
    p_pred.set_defaults(func=cmd_predict)

    p_sweep = sub.add_parser(
        "sweep", help="train across one parameter grid and report precision at 1"
    )
    p_sweep.add_argument("--data", required=True, help="training file")
    p_sweep.add_argument("--test", required=True, help="labeled evaluation file")
    p_sweep.add_argument("--param", choices=("r", "learners", "clusters", "maxit"),
                         required=True)
    p_sweep.add_argument(
        "--values", type=_int_list, required=True, help="comma-separated integer grid"
    )
    p_sweep.add_argument("--csv", default=None, help="also write the CSV rows here")
    _add_hyper_flags(p_sweep)
    _add_threads_flag(p_sweep)
    _add_data_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_self = sub.add_parser("selftest", help="run built-in consistency checks")
    p_self.add_argument(
        "--filter",
        default=None,
        help="only run checks whose category or name contains this string",
    )
    p_self.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RxmlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry_point():
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry_point()
