"""Non-CNN reference models: multinomial logistic regression over
bag-of-n-grams features, averaged word vectors, or their concatenation.

The vectorizer keeps the 30k most frequent uni+bi-grams (ties broken
lexicographically) and must be fitted on training folds only.  The
regression minimises cross-entropy + (lambda/2)||W||^2 by full-batch
gradient descent with a backtracking line search; lambda is picked from a
small grid by inner 3-fold cross-validation when not given.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from sentcnn.corpus import stratified_assignment
from sentcnn.embeddings import EmbeddingTable
from sentcnn.ndmath import Rng, mix_seed

MAX_FEATURES = 30_000
LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0)

FEATURE_MODES = ("bow", "avg_wv", "bow_plus_wv")


@dataclass
class BowVectorizer:
    """n-gram -> column index over uni- and bi-grams."""

    vocab: dict[tuple[str, ...], int]

    @classmethod
    def fit(
        cls, sentences: Iterable[Sequence[str]], max_features: int = MAX_FEATURES
    ) -> "BowVectorizer":
        counts: Counter = Counter()
        empty = True
        for tokens in sentences:
            empty = False
            for t in tokens:
                counts[(t,)] += 1
            for i in range(len(tokens) - 1):
                counts[(tokens[i], tokens[i + 1])] += 1
        if empty:
            raise ValueError("cannot fit a vectorizer on an empty corpus")
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:max_features]
        return cls(vocab={ngram: i for i, (ngram, _) in enumerate(ranked)})

    def __len__(self) -> int:
        return len(self.vocab)

    def counts_for(self, tokens: Sequence[str]) -> np.ndarray:
        vec = np.zeros(len(self.vocab))
        for t in tokens:
            col = self.vocab.get((t,))
            if col is not None:
                vec[col] += 1.0
        for i in range(len(tokens) - 1):
            col = self.vocab.get((tokens[i], tokens[i + 1]))
            if col is not None:
                vec[col] += 1.0
        return vec


def fit_bow(sentences: Iterable[Sequence[str]], max_features: int = MAX_FEATURES) -> BowVectorizer:
    """Fit the uni+bi-gram vocabulary on training sentences only."""
    return BowVectorizer.fit(sentences, max_features)


def average_word_vector(tokens: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    """Mean of the in-vocabulary word vectors; zero vector when none hit."""
    hits = [table.get(t) for t in tokens]
    hits = [h for h in hits if h is not None]
    if not hits:
        return np.zeros(table.dim)
    return np.mean(hits, axis=0)


def featurize(
    tokens: Sequence[str],
    mode: str,
    vectorizer: BowVectorizer | None = None,
    table: EmbeddingTable | None = None,
    binary: bool = False,
) -> np.ndarray:
    """One dense feature vector for a sentence.

    ``binary`` switches bag-of-n-gram counts to presence indicators.
    """
    if mode not in FEATURE_MODES:
        raise ValueError(f"unknown feature mode {mode!r}")
    parts = []
    if mode in ("bow", "bow_plus_wv"):
        if vectorizer is None:
            raise ValueError(f"mode {mode!r} needs a fitted vectorizer")
        counts = vectorizer.counts_for(tokens)
        parts.append((counts > 0).astype(np.float64) if binary else counts)
    if mode in ("avg_wv", "bow_plus_wv"):
        if table is None:
            raise ValueError(f"mode {mode!r} needs an embedding table")
        parts.append(average_word_vector(tokens, table))
    return parts[0] if len(parts) == 1 else np.concatenate(parts)


def featurize_all(
    sentences: Sequence[Sequence[str]],
    mode: str,
    vectorizer: BowVectorizer | None = None,
    table: EmbeddingTable | None = None,
    binary: bool = False,
):
    """Feature matrix for a corpus; sparse CSR when n-gram features are
    involved (30k columns are mostly zero), dense otherwise."""
    if mode == "avg_wv":
        return np.vstack([featurize(s, mode, vectorizer, table, binary) for s in sentences])
    rows = [
        sparse.csr_matrix(featurize(s, mode, vectorizer, table, binary)) for s in sentences
    ]
    return sparse.vstack(rows, format="csr")


@dataclass
class LinearModel:
    weights: np.ndarray  # (classes, features)
    bias: np.ndarray  # (classes,)
    l2_lambda: float

    def decision(self, x) -> np.ndarray:
        return np.asarray(x @ self.weights.T) + self.bias

    def predict_proba(self, x) -> np.ndarray:
        logits = self.decision(x)
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.decision(x), axis=1)


def _one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((labels.size, num_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def logreg_objective(w: np.ndarray, b: np.ndarray, x, y_onehot: np.ndarray, lam: float) -> float:
    logits = np.asarray(x @ w.T) + b
    logits -= logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(logits).sum(axis=1))
    ce = float(np.mean(log_norm - (logits * y_onehot).sum(axis=1)))
    return ce + 0.5 * lam * float(np.sum(w * w))


def logreg_gradient(
    w: np.ndarray, b: np.ndarray, x, y_onehot: np.ndarray, lam: float
) -> tuple[np.ndarray, np.ndarray]:
    n = y_onehot.shape[0]
    logits = np.asarray(x @ w.T) + b
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    probs = e / e.sum(axis=1, keepdims=True)
    resid = (probs - y_onehot) / n
    g_w = np.asarray(resid.T @ x) + lam * w
    g_b = resid.sum(axis=0)
    return g_w, g_b


def _fit(
    x,
    labels: np.ndarray,
    num_classes: int,
    lam: float,
    max_iter: int,
    tol: float,
    init_w: np.ndarray | None = None,
    init_b: np.ndarray | None = None,
) -> LinearModel:
    n_features = x.shape[1]
    w = np.zeros((num_classes, n_features)) if init_w is None else init_w.copy()
    b = np.zeros(num_classes) if init_b is None else init_b.copy()
    y = _one_hot(labels, num_classes)
    obj = logreg_objective(w, b, x, y, lam)
    step = 1.0
    for _ in range(max_iter):
        g_w, g_b = logreg_gradient(w, b, x, y, lam)
        g_norm_sq = float(np.sum(g_w * g_w) + np.sum(g_b * g_b))
        if np.sqrt(g_norm_sq) < tol:
            break
        step = min(step * 2.0, 1e4)  # warm-started backtracking
        decreased = False
        while step >= 1e-16:
            w_new = w - step * g_w
            b_new = b - step * g_b
            obj_new = logreg_objective(w_new, b_new, x, y, lam)
            if obj_new <= obj - 1e-4 * step * g_norm_sq:
                decreased = True
                break
            step *= 0.5
        if not decreased:
            break
        w, b, obj = w_new, b_new, obj_new
    return LinearModel(weights=w, bias=b, l2_lambda=lam)


def train_logreg(
    features,
    labels: Sequence[int],
    l2_lambda: float | None = None,
    seed: int = 0,
    max_iter: int = 5000,
    tol: float = 1e-7,
) -> LinearModel:
    """Fit the multinomial logistic baseline.

    With ``l2_lambda=None`` the penalty is chosen from ``LAMBDA_GRID`` by
    stratified inner 3-fold CV on the training data (first grid entry wins
    ties), then the model is refitted on everything.
    """
    labels = np.asarray(labels, dtype=np.int64)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("logistic regression needs at least two classes")
    num_classes = int(labels.max()) + 1

    if l2_lambda is None:
        l2_lambda = _select_lambda(features, labels, num_classes, seed, max_iter, tol)
    return _fit(features, labels, num_classes, l2_lambda, max_iter, tol)


def _select_lambda(
    x, labels: np.ndarray, num_classes: int, seed: int, max_iter: int, tol: float
) -> float:
    k = 3
    if np.min(np.bincount(labels)) < k:
        return LAMBDA_GRID[0]  # too small for an inner split
    assignment = stratified_assignment(labels, k, Rng(mix_seed(seed, 0x1A)))
    best_lam, best_acc = LAMBDA_GRID[0], -1.0
    for lam in LAMBDA_GRID:
        accs = []
        for fold in range(k):
            train_mask = assignment != fold
            model = _fit(x[train_mask], labels[train_mask], num_classes, lam, max_iter, tol)
            preds = model.predict(x[~train_mask])
            accs.append(float(np.mean(preds == labels[~train_mask])))
        mean_acc = float(np.mean(accs))
        if mean_acc > best_acc:
            best_acc, best_lam = mean_acc, lam
    return best_lam
