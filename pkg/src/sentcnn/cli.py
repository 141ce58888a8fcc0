"""Command-line entry point.

Subcommands: ``prep`` (load/clean a corpus, write stats), ``cv`` (replicated
cross-validation of one configuration), ``sweep`` (one-axis hyperparameter
sweep with resumable CSV output), ``report`` (aggregate table, percent-change
figure), ``baseline`` (logistic-regression reference models).

Exit codes: 0 success, 1 validation error, 2 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from sentcnn import baselines
from sentcnn.config import EncodingBuilder, RunSettings, load_settings
from sentcnn.corpus import Dataset, FormatError, load_dataset, make_folds, undersample_balance
from sentcnn.evaluation import replicate_cv
from sentcnn.ndmath import Rng, mix_seed
from sentcnn.sweep import (
    SweepSpec,
    aggregate_path,
    aggregate_results,
    default_jobs,
    expand_sweep,
    read_results,
    run_trials,
    write_results,
)

log = logging.getLogger("sentcnn")

DEFAULT_FOLD_SEED = 1
_SALT_BALANCE = 0x0B


class _UsageError(ValueError):
    """Bad command line; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); keep 2 for I/O only
        raise _UsageError(message)


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["polarity-pair", "trec", "tsv"], required=True)
    p.add_argument("--pos", help="positive-class file (polarity-pair)")
    p.add_argument("--neg", help="negative-class file (polarity-pair)")
    p.add_argument("--input", help="input file (trec/tsv)")
    p.add_argument("--name", help="dataset label used in result rows")
    p.add_argument("--balance", action="store_true", help="undersample to equal class sizes")


def _load_cli_dataset(args, seed: int) -> tuple[Dataset, str]:
    if args.format == "polarity-pair":
        if not (args.pos and args.neg):
            raise _UsageError("polarity-pair needs --pos and --neg")
        ds = load_dataset([args.pos, args.neg], "polarity-pair")
        name = args.name or Path(args.pos).stem
    else:
        if not args.input:
            raise _UsageError(f"{args.format} needs --input")
        ds = load_dataset(args.input, args.format)
        name = args.name or Path(args.input).stem
    if args.balance:
        ds = undersample_balance(ds, Rng(mix_seed(seed, _SALT_BALANCE)))
    return ds, name


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--w2v", help="word2vec binary embeddings")
    p.add_argument("--glove", help="GloVe text embeddings")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--fold-seed", type=int, default=DEFAULT_FOLD_SEED)
    p.add_argument("--metric", choices=["acc", "auc"], default="acc")


def _metric_name(flag: str) -> str:
    return "accuracy" if flag == "acc" else "auc"


def cmd_prep(args) -> int:
    ds, name = _load_cli_dataset(args, seed=0)
    meta = {
        "name": name,
        "format": args.format,
        "num_sentences": len(ds),
        "class_names": ds.class_names,
        "class_counts": dict(zip(ds.class_names, ds.class_counts())),
        "max_len": ds.max_len,
        "avg_len": round(ds.avg_len, 2),
        "vocab_size": len(ds.vocabulary()),
    }
    Path(args.out).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(meta, indent=2))
    return 0


def _prepare_run(args) -> tuple[Dataset, str, RunSettings, EncodingBuilder]:
    settings = load_settings(args.config)
    ds, name = _load_cli_dataset(args, settings.seed)
    builder = EncodingBuilder.for_dataset(ds, settings, w2v_path=args.w2v, glove_path=args.glove)
    return ds, name, settings, builder


def cmd_cv(args) -> int:
    ds, name, settings, builder = _prepare_run(args)
    plan = make_folds(ds, args.folds, args.fold_seed)
    model = settings.model_config(ds.num_classes)
    pad_to = max(ds.max_len, max(model.region_sizes))
    encoding = builder.build(settings.input_repr, pad_to)
    report = replicate_cv(
        args.reps, ds, plan, encoding, model, settings.train_config(), _metric_name(args.metric)
    )
    for r, mean in enumerate(report.per_replication):
        print(f"replication {r}: {mean:.2f}")
    print(f"{name}: {report.formatted()}  [{report.metric}, {args.reps} x {plan.k}-fold CV]")
    return 0


def cmd_sweep(args) -> int:
    ds, name, settings, builder = _prepare_run(args)
    plan = make_folds(ds, args.folds, args.fold_seed)
    spec = SweepSpec(
        base_model=settings.model_config(ds.num_classes),
        base_train=settings.train_config(),
        input_repr=settings.input_repr,
        axis=args.axis,
        values=tuple(v.strip() for v in args.values.split(";") if v.strip()),
        n_reps=args.reps,
        dataset_name=name,
    )
    configs = expand_sweep(spec)
    rows, failures = run_trials(
        configs,
        spec.n_reps,
        ds,
        plan,
        builder.build,
        axis=spec.axis,
        dataset_name=name,
        metric=_metric_name(args.metric),
        results_path=args.out,
        jobs=args.jobs,
    )
    print(f"wrote {len(rows)} fold rows to {args.out} (aggregate: {aggregate_path(args.out)})")
    if failures:
        for msg in failures:
            print(f"FAILED: {msg}", file=sys.stderr)
        return 1
    return 0


def cmd_report(args) -> int:
    from sentcnn import report as report_mod

    rows = read_results(args.infile)
    if not rows:
        raise _UsageError(f"no result rows in {args.infile}")
    aggregate = aggregate_results(rows)
    table = report_mod.render_report(aggregate, args.baseline)
    print(table, end="")

    out_prefix = Path(args.out_prefix) if args.out_prefix else Path(args.infile).with_suffix("")
    write_results([], args.infile)  # refresh the aggregate companion file
    fig_path = report_mod.plot_percent_change(
        aggregate,
        args.baseline,
        Path(str(out_prefix) + "_percent_change.png"),
        title=f"{rows[0].dataset}: {rows[0].axis}",
        metric=rows[0].metric,
    )
    table_path = Path(str(out_prefix) + "_report.txt")
    table_path.write_text(table, encoding="utf-8")
    print(f"figure: {fig_path}")
    print(f"table:  {table_path}")
    return 0


def cmd_baseline(args) -> int:
    settings = load_settings(args.config)
    ds, name = _load_cli_dataset(args, settings.seed)
    plan = make_folds(ds, args.folds, args.fold_seed)
    table = None
    if args.mode in ("wv", "bowwv"):
        if not args.w2v and not args.glove:
            raise _UsageError(f"baseline mode {args.mode!r} needs --w2v or --glove")
        builder = EncodingBuilder(w2v_path=args.w2v, glove_path=args.glove)
        table = builder.table("word2vec" if args.w2v else "glove")
    mode = {"bow": "bow", "wv": "avg_wv", "bowwv": "bow_plus_wv"}[args.mode]

    tokens = [s.tokens for s in ds.sentences]
    labels = ds.labels()
    fold_scores = []
    for fold in range(plan.k):
        train_idx = plan.train_indices(fold)
        test_idx = plan.test_indices(fold)
        vectorizer = None
        if mode != "avg_wv":
            vectorizer = baselines.BowVectorizer.fit([tokens[i] for i in train_idx])
        x_train = baselines.featurize_all([tokens[i] for i in train_idx], mode, vectorizer, table)
        x_test = baselines.featurize_all([tokens[i] for i in test_idx], mode, vectorizer, table)
        model = baselines.train_logreg(x_train, labels[train_idx], seed=settings.seed)
        if args.metric == "auc":
            from sentcnn.evaluation import roc_auc

            score = roc_auc(model.predict_proba(x_test)[:, 1], labels[test_idx])
        else:
            score = float(np.mean(model.predict(x_test) == labels[test_idx]))
        fold_scores.append(100.0 * score)
        log.info("fold %d: %.2f (lambda=%g)", fold, fold_scores[-1], model.l2_lambda)
    print(f"{name} [{args.mode}]: mean {np.mean(fold_scores):.2f} over {plan.k} folds")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="sentcnn", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep", help="load and clean a corpus, write stats")
    _add_dataset_args(p)
    p.add_argument("--out", required=True, help="output .meta path (JSON)")
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("cv", help="replicated cross-validation of one config")
    _add_dataset_args(p)
    _add_run_args(p)
    p.add_argument("--reps", type=int, default=10)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("sweep", help="one-axis hyperparameter sweep")
    _add_dataset_args(p)
    _add_run_args(p)
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True, help="semicolon-separated axis values")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--jobs", type=int, default=default_jobs())
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="render the aggregate table and figure")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--baseline", required=True, help="axis value used as reference point")
    p.add_argument("--out-prefix")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("baseline", help="logistic-regression reference model")
    _add_dataset_args(p)
    p.add_argument("--mode", choices=["bow", "wv", "bowwv"], required=True)
    p.add_argument("--config")
    p.add_argument("--w2v")
    p.add_argument("--glove")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--fold-seed", type=int, default=DEFAULT_FOLD_SEED)
    p.add_argument("--metric", choices=["acc", "auc"], default="acc")
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return args.func(args)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (FormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
