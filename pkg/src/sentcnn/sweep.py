"""Declarative one-axis sweeps, trial execution and CSV persistence.

A sweep varies exactly one axis of the base configuration; every value runs
``n_reps`` replications of fixed-fold CV.  Fold-level rows stream into an
append-only CSV so interrupted sweeps resume without recomputing or
rewriting finished (value, replication) pairs.
"""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from sentcnn.cnn import ModelConfig, Pooling
from sentcnn.corpus import Dataset, FoldPlan
from sentcnn.embeddings import SentenceEncoding
from sentcnn.evaluation import replication_seed, run_cv
from sentcnn.optim import TrainConfig

log = logging.getLogger(__name__)

AXES = (
    "region_size",
    "region_combo",
    "feature_maps",
    "activation",
    "pooling",
    "dropout_penult",
    "dropout_conv",
    "l2_constraint",
    "input_repr",
)

CSV_FIELDS = (
    "dataset",
    "axis",
    "value",
    "replication",
    "fold",
    "metric",
    "score",
    "seconds",
    "seed",
)


@dataclass(frozen=True)
class SweepSpec:
    """One-axis sweep: base config plus the axis values to try."""

    base_model: ModelConfig
    base_train: TrainConfig
    input_repr: str
    axis: str
    values: tuple[str, ...]
    n_reps: int
    dataset_name: str

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.n_reps < 1:
            raise ValueError("n_reps must be >= 1")


@dataclass(frozen=True)
class BoundConfig:
    """One fully-bound experiment: canonical value string plus configs."""

    value: str
    model: ModelConfig
    train: TrainConfig
    input_repr: str


def _canon_float(text: str) -> str:
    return format(float(text), "g")


def _parse_combo(text: str) -> tuple[int, ...]:
    inner = text.strip().strip("()")
    sizes = tuple(int(v) for v in inner.split(",") if v.strip())
    if not sizes:
        raise ValueError(f"empty region combo {text!r}")
    return sizes


def bind_axis_value(spec: SweepSpec, raw: str) -> BoundConfig:
    """Bind one axis value, producing its canonical string form.

    The literal ``none`` on the dropout axes means "no regularization at
    all": the rate goes to zero AND the l2 constraint comes off.  On the
    l2 axis ``none`` lifts only the constraint.
    """
    model = spec.base_model
    train = spec.base_train
    repr_ = spec.input_repr
    axis = spec.axis
    text = raw.strip()
    try:
        if axis == "region_size":
            model = replace(model, region_sizes=(int(text),))
            value = str(int(text))
        elif axis == "region_combo":
            sizes = _parse_combo(text)
            model = replace(model, region_sizes=sizes)
            value = "(" + ",".join(str(s) for s in sizes) + ")"
        elif axis == "feature_maps":
            model = replace(model, maps_per_region=int(text))
            value = str(int(text))
        elif axis == "activation":
            model = replace(model, activation=text)
            value = text
        elif axis == "pooling":
            pooling = Pooling.parse(text)
            model = replace(model, pooling=pooling)
            value = pooling.canonical()
        elif axis == "dropout_penult":
            if text.lower() == "none":
                model = replace(model, dropout_penult=0.0, l2_constraint=None)
                value = "none"
            else:
                model = replace(model, dropout_penult=float(text))
                value = _canon_float(text)
        elif axis == "dropout_conv":
            if text.lower() == "none":
                model = replace(model, dropout_conv=0.0, l2_constraint=None)
                value = "none"
            else:
                model = replace(model, dropout_conv=float(text))
                value = _canon_float(text)
        elif axis == "l2_constraint":
            if text.lower() == "none":
                model = replace(model, l2_constraint=None)
                value = "none"
            else:
                model = replace(model, l2_constraint=float(text))
                value = _canon_float(text)
        else:  # input_repr
            from sentcnn.config import INPUT_REPRS

            if text not in INPUT_REPRS:
                raise ValueError(f"unknown input representation {text!r}")
            repr_ = text
            value = text
    except ValueError as e:
        raise ValueError(f"invalid value {raw!r} for axis {axis}: {e}") from None
    return BoundConfig(value=value, model=model, train=train, input_repr=repr_)


def expand_sweep(spec: SweepSpec) -> list[BoundConfig]:
    """One fully-bound config per axis value, all other fields from base."""
    return [bind_axis_value(spec, v) for v in spec.values]


@dataclass(frozen=True)
class TrialResult:
    dataset: str
    axis: str
    value: str
    replication: int
    fold: int
    metric: str
    score: float  # percent
    seconds: float
    seed: int

    def csv_row(self) -> list[str]:
        return [
            self.dataset,
            self.axis,
            self.value,
            str(self.replication),
            str(self.fold),
            self.metric,
            f"{self.score:.4f}",
            f"{self.seconds:.3f}",
            str(self.seed),
        ]


def read_results(path: str | Path) -> list[TrialResult]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(
                TrialResult(
                    dataset=row["dataset"],
                    axis=row["axis"],
                    value=row["value"],
                    replication=int(row["replication"]),
                    fold=int(row["fold"]),
                    metric=row["metric"],
                    score=float(row["score"]),
                    seconds=float(row["seconds"]),
                    seed=int(row["seed"]),
                )
            )
    return out


def _append_rows(rows: Sequence[TrialResult], path: Path) -> None:
    new_file = not path.exists()
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(CSV_FIELDS)
        for r in rows:
            writer.writerow(r.csv_row())


@dataclass(frozen=True)
class AggregateRow:
    """Table-sized summary for one axis value: stats over replication means."""

    value: str
    mean: float
    min: float
    max: float
    per_replication: tuple[float, ...] = ()


def aggregate_results(rows: Sequence[TrialResult]) -> list[AggregateRow]:
    """Group fold rows by (axis, value): each replication becomes a CV mean,
    then values aggregate to mean/min/max, ordered by first appearance.

    Rows are keyed by fold within a replication, so duplicate fold rows
    (possible after a rerun over a torn write) cannot skew the means.
    """
    order: list[tuple[str, str]] = []
    buckets: dict[tuple[str, str], dict[int, dict[int, float]]] = {}
    for r in rows:
        key = (r.axis, r.value)
        if key not in buckets:
            buckets[key] = {}
            order.append(key)
        buckets[key].setdefault(r.replication, {})[r.fold] = r.score
    out = []
    for key in order:
        reps = buckets[key]
        means = [
            float(np.mean(list(folds.values()))) for _, folds in sorted(reps.items())
        ]
        out.append(
            AggregateRow(
                value=key[1],
                mean=float(np.mean(means)),
                min=min(means),
                max=max(means),
                per_replication=tuple(means),
            )
        )
    return out


def aggregate_path(results_path: str | Path) -> Path:
    p = Path(results_path)
    return p.with_name(p.stem + "_aggregate.csv")


def _write_aggregate(rows: Sequence[TrialResult], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value", "mean", "min", "max"])
        for agg in aggregate_results(rows):
            writer.writerow([agg.value, f"{agg.mean:.4f}", f"{agg.min:.4f}", f"{agg.max:.4f}"])


def write_results(results: Sequence[TrialResult], path: str | Path) -> None:
    """Append fold rows to the results CSV (header on first write) and
    refresh the ``*_aggregate.csv`` companion from the full file."""
    path = Path(path)
    _append_rows(results, path)
    _write_aggregate(read_results(path), aggregate_path(path))


def completed_pairs(rows: Sequence[TrialResult], k: int) -> set[tuple[str, str, int]]:
    """(axis, value, replication) triples with all k fold rows present."""
    seen: dict[tuple[str, str, int], set[int]] = {}
    for r in rows:
        seen.setdefault((r.axis, r.value, r.replication), set()).add(r.fold)
    return {key for key, folds in seen.items() if len(folds) == k}


@dataclass
class _Task:
    config: BoundConfig
    replication: int
    axis: str
    dataset_name: str
    metric: str


def _run_task(
    task: _Task,
    dataset: Dataset,
    plan: FoldPlan,
    encoding: SentenceEncoding,
) -> list[TrialResult]:
    seed = replication_seed(task.config.train.seed, task.replication)
    started = time.perf_counter()
    result = run_cv(
        dataset,
        plan,
        encoding,
        task.config.model,
        replace(task.config.train, seed=seed),
        task.metric,
    )
    log.info(
        "%s=%s rep %d: mean %.2f (%.1fs)",
        task.axis,
        task.config.value,
        task.replication,
        result.mean,
        time.perf_counter() - started,
    )
    return [
        TrialResult(
            dataset=task.dataset_name,
            axis=task.axis,
            value=task.config.value,
            replication=task.replication,
            fold=fold,
            metric=task.metric,
            score=score,
            seconds=seconds,
            seed=seed,
        )
        for fold, (score, seconds) in enumerate(zip(result.fold_scores, result.fold_seconds))
    ]


def _pool_entry(args):
    return _run_task(*args)


def run_trials(
    configs: Sequence[BoundConfig],
    n_reps: int,
    dataset: Dataset,
    plan: FoldPlan,
    encoding_for: Callable[[str, int], SentenceEncoding],
    *,
    axis: str,
    dataset_name: str,
    metric: str = "accuracy",
    results_path: str | Path | None = None,
    jobs: int = 1,
) -> tuple[list[TrialResult], list[str]]:
    """Run every (config, replication) pair, streaming rows to
    ``results_path`` as replications finish.

    Pairs already complete in the results file are skipped, so reruns after
    an interruption append only missing work.  ``encoding_for(input_repr,
    pad_to)`` supplies the input encoding; scores are deterministic per
    (config, replication) regardless of ``jobs``.  Returns (new rows,
    failure messages); failed trials are recorded and the rest continue.
    """
    done: set[tuple[str, str, int]] = set()
    if results_path is not None:
        done = completed_pairs(read_results(results_path), plan.k)

    tasks = []
    for config in configs:
        pending = [r for r in range(n_reps) if (axis, config.value, r) not in done]
        if not pending:
            continue
        pad_to = max(dataset.max_len, max(config.model.region_sizes))
        encoding = encoding_for(config.input_repr, pad_to)
        for r in pending:
            tasks.append((_Task(config, r, axis, dataset_name, metric), dataset, plan, encoding))

    jobs = max(1, jobs)
    all_rows: list[TrialResult] = []
    failures: list[str] = []

    def _consume(task: _Task, outcome, error: Exception | None):
        if error is not None:
            msg = f"{task.axis}={task.config.value} rep {task.replication}: {error}"
            failures.append(msg)
            log.error("trial failed: %s", msg)
            return
        all_rows.extend(outcome)
        if results_path is not None:
            write_results(outcome, results_path)

    if jobs == 1 or len(tasks) <= 1:
        for args in tasks:
            try:
                rows = _run_task(*args)
            except Exception as e:  # record and continue with the other trials
                _consume(args[0], None, e)
            else:
                _consume(args[0], rows, None)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [(args[0], pool.submit(_pool_entry, args)) for args in tasks]
            for task, fut in futures:  # submission order keeps the CSV stable
                try:
                    rows = fut.result()
                except Exception as e:
                    _consume(task, None, e)
                else:
                    _consume(task, rows, None)
    return all_rows, failures


def default_jobs() -> int:
    return os.cpu_count() or 1
