"""ADADELTA and the minibatch training loop with early stopping.

The update rule, applied elementwise with decay ``rho`` and damping ``eps``:

    E[g^2]  <- rho * E[g^2]  + (1 - rho) * g^2
    dx       = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
    E[dx^2] <- rho * E[dx^2] + (1 - rho) * dx^2
    x       <- x + dx

There is no learning rate; the accumulators adapt the step size.  Batch
gradients are averaged (not summed) so the final partial batch takes steps
of comparable size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from sentcnn.cnn import (
    BankGrads,
    CnnGrads,
    CnnParams,
    ModelConfig,
    apply_constraint,
    backward,
    forward,
    init_params,
)
from sentcnn.corpus import LabeledSentence
from sentcnn.embeddings import SentenceEncoding, build_sentence_matrix
from sentcnn.ndmath import Rng, cross_entropy, mix_seed

log = logging.getLogger(__name__)

ADADELTA_RHO = 0.95
ADADELTA_EPS = 1e-6

# Salts for the independent random streams one training run owns.
_SALT_SPLIT = 0x11
_SALT_INIT = 0x12
_SALT_SHUFFLE = 0x13
_SALT_DROPOUT = 0x14


@dataclass
class TrainConfig:
    minibatch: int = 50
    max_epochs: int = 25
    patience: int = 5
    val_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if self.minibatch < 1:
            raise ValueError("minibatch must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in (0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")


@dataclass
class AdadeltaState:
    """Per-parameter running accumulators E[g^2] and E[dx^2]."""

    acc_grad_sq: np.ndarray
    acc_delta_sq: np.ndarray
    rho: float = ADADELTA_RHO
    eps: float = ADADELTA_EPS

    @classmethod
    def for_param(cls, param: np.ndarray, rho: float = ADADELTA_RHO, eps: float = ADADELTA_EPS):
        return cls(np.zeros_like(param), np.zeros_like(param), rho, eps)


def adadelta_step(param: np.ndarray, grad: np.ndarray, state: AdadeltaState) -> np.ndarray:
    """One in-place ADADELTA update of ``param`` and ``state``."""
    if param.shape != grad.shape or param.shape != state.acc_grad_sq.shape:
        raise ValueError(
            f"shape mismatch: param {param.shape}, grad {grad.shape}, "
            f"state {state.acc_grad_sq.shape}"
        )
    rho, eps = state.rho, state.eps
    state.acc_grad_sq *= rho
    state.acc_grad_sq += (1.0 - rho) * grad * grad
    delta = -np.sqrt(state.acc_delta_sq + eps) / np.sqrt(state.acc_grad_sq + eps) * grad
    param += delta
    state.acc_delta_sq *= rho
    state.acc_delta_sq += (1.0 - rho) * delta * delta
    return param


@dataclass
class EpochStats:
    loss: float
    val_accuracy: float


def _stratified_val_split(
    examples: Sequence[LabeledSentence], num_classes: int, fraction: float, rng: Rng
) -> tuple[list[int], list[int]]:
    """(train_indices, val_indices); roughly ``fraction`` of each class goes
    to validation, never emptying a class on the training side."""
    per_class = [[i for i, s in enumerate(examples) if s.label == c] for c in range(num_classes)]
    val: list[int] = []
    for idxs in per_class:
        shuffled = list(idxs)
        rng.shuffle(shuffled)
        n_val = min(int(fraction * len(idxs) + 0.5), len(idxs) - 1)
        val.extend(shuffled[:n_val])
    if not val:
        # corpus too small for a fractional split: hold out one example from
        # the largest class that can spare it
        donors = [idxs for idxs in per_class if len(idxs) >= 2]
        if donors:
            largest = max(donors, key=len)
            shuffled = list(largest)
            rng.shuffle(shuffled)
            val.append(shuffled[0])
    val_set = set(val)
    train = [i for i in range(len(examples)) if i not in val_set]
    return train, sorted(val_set)


class _ModelInput:
    """Per-example input builder: static mats are cached, non-static mats are
    looked up from the live embedding every visit."""

    def __init__(self, encoding: SentenceEncoding, params: CnnParams, config: ModelConfig):
        self.encoding = encoding
        self.params = params
        self.config = config
        self._static_cache: dict = {}

    def matrix(self, example: LabeledSentence, key=None):
        """Returns (sentence matrix, token_rows or None)."""
        params = self.params
        if self.config.embedding_mode == "non_static" and params.embedding is not None:
            rows = []
            fallback: list[tuple[int, str]] = []
            for i, tok in enumerate(example.tokens):
                row = params.vocab.get(tok)
                rows.append(-1 if row is None else row)
                if row is None:
                    fallback.append((i, tok))
            a = np.zeros((params.pad_to, params.d))
            known = [(i, r) for i, r in enumerate(rows) if r >= 0]
            if known:
                pos, rr = zip(*known)
                a[list(pos)] = params.embedding[list(rr)]
            for i, tok in fallback:
                a[i] = self.encoding.vector_for(tok)
            token_rows = np.array(rows, dtype=np.int64)
            return a, token_rows
        if key is not None and key in self._static_cache:
            return self._static_cache[key], None
        a = build_sentence_matrix(example.tokens, self.encoding)
        if key is not None:
            self._static_cache[key] = a
        return a, None


def predict_proba(
    tokens: Sequence[str],
    params: CnnParams,
    config: ModelConfig,
    encoding: SentenceEncoding,
) -> np.ndarray:
    """Eval-mode class probabilities for one tokenized sentence."""
    inputs = _ModelInput(encoding, params, config)
    a, _ = inputs.matrix(LabeledSentence(tuple(tokens), 0))
    probs, _ = forward(a, params, config, rng=None, train_mode=False)
    return probs


def _eval_accuracy(
    examples: Sequence[LabeledSentence],
    inputs: "_ModelInput",
    params: CnnParams,
    config: ModelConfig,
    key_prefix: str = "v",
) -> float:
    if not examples:
        return 0.0
    hits = 0
    for i, ex in enumerate(examples):
        a, _ = inputs.matrix(ex, key=(key_prefix, i))
        probs, _ = forward(a, params, config, rng=None, train_mode=False)
        hits += int(np.argmax(probs)) == ex.label
    return hits / len(examples)


def train_fold(
    train_set: Sequence[LabeledSentence],
    encoding: SentenceEncoding,
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> tuple[CnnParams, list[EpochStats]]:
    """Train one model on ``train_set`` and return the best-validation
    snapshot plus per-epoch (mean train loss, validation accuracy) history.

    A stratified ``val_fraction`` split is held out for early stopping;
    training stops once validation accuracy has not strictly improved for
    more than ``patience`` consecutive epochs, or at ``max_epochs``.  Among
    epochs tied at the best validation accuracy the most recent snapshot is
    kept (later epochs have seen more updates).
    """
    if not train_set:
        raise ValueError("empty training set")
    num_classes = model_config.num_classes
    present = {s.label for s in train_set}
    if present != set(range(num_classes)):
        missing = sorted(set(range(num_classes)) - present)
        raise ValueError(f"training set is missing class(es) {missing}")

    seed = train_config.seed
    split_rng = Rng(mix_seed(seed, _SALT_SPLIT))
    init_rng = Rng(mix_seed(seed, _SALT_INIT))
    shuffle_rng = Rng(mix_seed(seed, _SALT_SHUFFLE))
    dropout_rng = Rng(mix_seed(seed, _SALT_DROPOUT))

    train_idx, val_idx = _stratified_val_split(
        train_set, num_classes, train_config.val_fraction, split_rng
    )
    train_examples = [train_set[i] for i in train_idx]
    val_examples = [train_set[i] for i in val_idx]

    params = init_params(model_config, encoding.dim, encoding.pad_to, init_rng)
    if model_config.embedding_mode == "non_static":
        vocab: dict[str, int] = {}
        for ex in train_examples:
            for tok in ex.tokens:
                vocab.setdefault(tok, len(vocab))
        emb = np.empty((len(vocab), encoding.dim))
        for tok, row in vocab.items():
            emb[row] = encoding.vector_for(tok)
        params.embedding = emb
        params.vocab = vocab

    states = _make_states(params)
    inputs = _ModelInput(encoding, params, model_config)

    best_params = params.copy()
    best_acc = -np.inf
    since_best = 0
    history: list[EpochStats] = []
    order = list(range(len(train_examples)))

    for _epoch in range(train_config.max_epochs):
        shuffle_rng.shuffle(order)
        loss_sum = 0.0
        for start in range(0, len(order), train_config.minibatch):
            batch = order[start : start + train_config.minibatch]
            loss_sum += _train_batch(
                [train_examples[i] for i in batch],
                batch,
                inputs,
                params,
                model_config,
                states,
                dropout_rng,
            )
        if val_examples:
            val_acc = _eval_accuracy(val_examples, inputs, params, model_config, "v")
        else:
            val_acc = _eval_accuracy(train_examples, inputs, params, model_config, "t")
        history.append(EpochStats(loss=loss_sum / len(order), val_accuracy=val_acc))
        improved = val_acc > best_acc
        if val_acc >= best_acc:
            best_acc = val_acc
            best_params = params.copy()
        since_best = 0 if improved else since_best + 1
        if since_best > train_config.patience:
            break
    return best_params, history


def _make_states(params: CnnParams) -> dict[str, AdadeltaState]:
    states = {}
    for i, bank in enumerate(params.banks):
        states[f"bank{i}.w"] = AdadeltaState.for_param(bank.w)
        states[f"bank{i}.b"] = AdadeltaState.for_param(bank.b)
    states["u"] = AdadeltaState.for_param(params.u)
    states["b_softmax"] = AdadeltaState.for_param(params.b_softmax)
    if params.embedding is not None:
        states["embedding"] = AdadeltaState.for_param(params.embedding)
    return states


def _train_batch(
    batch: Sequence[LabeledSentence],
    batch_keys: Sequence[int],
    inputs: _ModelInput,
    params: CnnParams,
    config: ModelConfig,
    states: dict[str, AdadeltaState],
    rng: Rng,
) -> float:
    """Accumulate mean gradients over the batch, apply one ADADELTA step per
    parameter, re-apply the norm constraint.  Returns the summed loss."""
    acc = _zero_grads(params)
    emb_grad = None
    if params.embedding is not None:
        emb_grad = np.zeros_like(params.embedding)
    loss_sum = 0.0
    for key, ex in zip(batch_keys, batch):
        a, token_rows = inputs.matrix(ex, key=("t", key))
        probs, trace = forward(a, params, config, rng, train_mode=True, token_rows=token_rows)
        loss_sum += cross_entropy(probs, ex.label)
        grads = backward(trace, params, config, ex.label)
        for bi in range(len(params.banks)):
            acc.banks[bi].w += grads.banks[bi].w
            acc.banks[bi].b += grads.banks[bi].b
        acc.u += grads.u
        acc.b_softmax += grads.b_softmax
        if emb_grad is not None and grads.emb_rows is not None:
            keep = grads.emb_rows >= 0  # rows absent from the model vocabulary
            np.add.at(emb_grad, grads.emb_rows[keep], grads.emb_vecs[keep])

    scale = 1.0 / len(batch)
    for i, bank in enumerate(params.banks):
        adadelta_step(bank.w, acc.banks[i].w * scale, states[f"bank{i}.w"])
        adadelta_step(bank.b, acc.banks[i].b * scale, states[f"bank{i}.b"])
    adadelta_step(params.u, acc.u * scale, states["u"])
    adadelta_step(params.b_softmax, acc.b_softmax * scale, states["b_softmax"])
    if emb_grad is not None:
        adadelta_step(params.embedding, emb_grad * scale, states["embedding"])
    if config.l2_constraint is not None:
        apply_constraint(params, config.l2_constraint)
    return loss_sum


def _zero_grads(params: CnnParams) -> CnnGrads:
    return CnnGrads(
        banks=[BankGrads(np.zeros_like(b.w), np.zeros_like(b.b)) for b in params.banks],
        u=np.zeros_like(params.u),
        b_softmax=np.zeros_like(params.b_softmax),
    )
