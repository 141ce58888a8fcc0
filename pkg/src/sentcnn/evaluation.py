"""Metrics, cross-validation execution, and replicated-run reporting.

Scores reported by :func:`run_cv` / :func:`replicate_cv` are percentages
(accuracy or AUC x 100) to match the tabular report format; the raw metric
functions :func:`accuracy` and :func:`roc_auc` return fractions in [0, 1].

A *replication* is one full run of fixed-fold k-fold CV under a fresh
training seed; replication ``r`` trains with ``mix_seed(base_seed, r)``
while the fold plan stays fixed, so the spread of per-replication means
isolates the variance of the stochastic learning procedure itself.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from sentcnn.cnn import ModelConfig
from sentcnn.corpus import Dataset, FoldPlan
from sentcnn.embeddings import SentenceEncoding
from sentcnn.ndmath import mix_seed
from sentcnn.optim import TrainConfig, predict_proba, train_fold

METRICS = ("accuracy", "auc")


def accuracy(preds: Sequence[int], labels: Sequence[int]) -> float:
    """Fraction of exact matches."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape or preds.size == 0:
        raise ValueError("predictions and labels must be equal-length, non-empty")
    return float(np.mean(preds == labels))


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve via rank sums with midrank tie handling.

    Equals the Mann-Whitney statistic: the probability that a random
    positive outscores a random negative, ties counting one half.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must be equal length")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum_pos = float(np.sum(ranks[labels == 1]))
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass
class CvResult:
    """Per-fold percent scores for one cross-validation run."""

    fold_scores: list[float]
    mean: float
    fold_seconds: list[float]


def run_cv(
    dataset: Dataset,
    plan: FoldPlan,
    encoding: SentenceEncoding,
    model_config: ModelConfig,
    train_config: TrainConfig,
    metric: str = "accuracy",
) -> CvResult:
    """Train and score each fold of ``plan``: fold f is held out, the rest
    trains via :func:`train_fold` with seed ``mix_seed(seed, f)``."""
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if len(plan.assignment) != len(dataset):
        raise ValueError("fold plan does not match dataset size")
    if metric == "auc" and dataset.num_classes != 2:
        raise ValueError("AUC is only defined for binary datasets")

    fold_scores: list[float] = []
    fold_seconds: list[float] = []
    for fold in range(plan.k):
        started = time.perf_counter()
        try:
            train_sents = [dataset.sentences[i] for i in plan.train_indices(fold)]
            test_sents = [dataset.sentences[i] for i in plan.test_indices(fold)]
            fold_cfg = replace(train_config, seed=mix_seed(train_config.seed, fold))
            params, _history = train_fold(train_sents, encoding, model_config, fold_cfg)
            labels = [s.label for s in test_sents]
            if metric == "accuracy":
                preds = [
                    int(np.argmax(predict_proba(s.tokens, params, model_config, encoding)))
                    for s in test_sents
                ]
                score = accuracy(preds, labels)
            else:
                pos_scores = [
                    float(predict_proba(s.tokens, params, model_config, encoding)[1])
                    for s in test_sents
                ]
                score = roc_auc(pos_scores, labels)
        except Exception as e:
            raise RuntimeError(f"cross-validation failed in fold {fold}: {e}") from e
        fold_scores.append(100.0 * score)
        fold_seconds.append(time.perf_counter() - started)
    return CvResult(
        fold_scores=fold_scores,
        mean=float(np.mean(fold_scores)),
        fold_seconds=fold_seconds,
    )


def replication_seed(base_seed: int, replication: int) -> int:
    """Training seed for one replication of a replicated-CV run."""
    return mix_seed(base_seed, replication)


@dataclass
class ReplicationReport:
    """Aggregate of n replications of fixed-fold CV: mean, min and max of
    the per-replication CV means, in percent."""

    per_replication: list[float]
    mean: float
    min: float
    max: float
    metric: str
    fold_scores: list[list[float]]
    fold_seconds: list[list[float]]
    seeds: list[int]

    @classmethod
    def build(
        cls,
        per_replication: Sequence[float],
        metric: str,
        fold_scores: Sequence[Sequence[float]] = (),
        fold_seconds: Sequence[Sequence[float]] = (),
        seeds: Sequence[int] = (),
    ) -> "ReplicationReport":
        if not per_replication:
            raise ValueError("need at least one replication")
        means = [float(x) for x in per_replication]
        return cls(
            per_replication=means,
            mean=float(np.mean(means)),
            min=min(means),
            max=max(means),
            metric=metric,
            fold_scores=[list(f) for f in fold_scores],
            fold_seconds=[list(f) for f in fold_seconds],
            seeds=list(seeds),
        )

    def formatted(self) -> str:
        return f"{self.mean:.2f} ({self.min:.2f}, {self.max:.2f})"


def replicate_cv(
    n_reps: int,
    dataset: Dataset,
    plan: FoldPlan,
    encoding: SentenceEncoding,
    model_config: ModelConfig,
    train_config: TrainConfig,
    metric: str = "accuracy",
) -> ReplicationReport:
    """Run ``n_reps`` replications of CV over the SAME fold plan, varying
    only the training seed, and aggregate the replication means."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    means: list[float] = []
    folds: list[list[float]] = []
    seconds: list[list[float]] = []
    seeds: list[int] = []
    for r in range(n_reps):
        seed = replication_seed(train_config.seed, r)
        result = run_cv(
            dataset, plan, encoding, model_config, replace(train_config, seed=seed), metric
        )
        means.append(result.mean)
        folds.append(result.fold_scores)
        seconds.append(result.fold_seconds)
        seeds.append(seed)
    return ReplicationReport.build(means, metric, folds, seconds, seeds)


def percent_change(series: Sequence[float], baseline_index: int) -> list[float]:
    """Each score's percent change relative to ``series[baseline_index]``."""
    values = [float(x) for x in series]
    if not 0 <= baseline_index < len(values):
        raise ValueError("baseline index out of range")
    base = values[baseline_index]
    if base == 0.0:
        raise ValueError("baseline score must be nonzero")
    return [100.0 * (v - base) / base for v in values]
