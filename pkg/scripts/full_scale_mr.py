#!/usr/bin/env python3
"""Full-scale reproduction: replicated 10-fold CV on the movie-review
polarity corpus with pretrained word2vec vectors at the baseline
configuration.

This is hours of CPU time and needs the real data files, so it is not part
of the gating test suite.  Expected outcome: mean accuracy around 81 with a
sub-point spread across replications; the acceptance band is [79.7, 82.6].

Usage:
    python scripts/full_scale_mr.py --pos rt-polarity.pos --neg rt-polarity.neg \
        --w2v GoogleNews-vectors-negative300.bin [--reps 10] [--folds 10]

Environment: the test suite runs this automatically when SENTCNN_MR_POS,
SENTCNN_MR_NEG and SENTCNN_W2V are set.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sentcnn.cnn import ModelConfig
from sentcnn.corpus import load_dataset, make_folds
from sentcnn.embeddings import SentenceEncoding, load_word2vec_bin
from sentcnn.evaluation import ReplicationReport, replicate_cv
from sentcnn.ndmath import mix_seed
from sentcnn.optim import TrainConfig


def run_full_scale(
    pos: str, neg: str, w2v: str, reps: int = 10, folds: int = 10, seed: int = 0
) -> ReplicationReport:
    dataset = load_dataset([pos, neg], "polarity-pair")
    print(
        f"loaded {len(dataset)} sentences, avg_len {dataset.avg_len:.1f}, "
        f"max_len {dataset.max_len}"
    )
    plan = make_folds(dataset, folds, seed=1)

    print(f"loading vectors from {w2v} ...")
    started = time.time()
    table = load_word2vec_bin(w2v)
    print(f"{len(table)} vectors of dim {table.dim} in {time.time() - started:.0f}s")

    model = ModelConfig(num_classes=2)  # baseline defaults throughout
    pad_to = max(dataset.max_len, max(model.region_sizes))
    encoding = SentenceEncoding.pretrained(table, pad_to, oov_seed=mix_seed(seed, 0x0E))
    train = TrainConfig(seed=seed)

    report = replicate_cv(reps, dataset, plan, encoding, model, train, "accuracy")
    for r, mean in enumerate(report.per_replication):
        print(f"replication {r}: {mean:.2f}")
    print(f"result: {report.formatted()}")
    return report


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--pos", required=True)
    parser.add_argument("--neg", required=True)
    parser.add_argument("--w2v", required=True)
    parser.add_argument("--reps", type=int, default=10)
    parser.add_argument("--folds", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--check", action="store_true", help="exit nonzero unless the mean lands in [79.7, 82.6]"
    )
    args = parser.parse_args()
    report = run_full_scale(args.pos, args.neg, args.w2v, args.reps, args.folds, args.seed)
    if args.check and not 79.7 <= report.mean <= 82.6:
        print(f"mean {report.mean:.2f} outside the acceptance band [79.7, 82.6]")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
