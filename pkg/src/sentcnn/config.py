"""Flat ``key = value`` run-configuration files and input-encoding building.

Every model/training field has one documented key; unset keys fall back to
the compiled-in baseline defaults.  Lines starting with ``#`` (or blank)
are ignored; inline ``#`` comments are stripped.

Keys (with defaults):

    region_sizes   = 3,4,5        filter heights; duplicates allowed
    feature_maps   = 100          filters per region size
    activation     = relu         relu|tanh|sigmoid|softplus|iden|cube|tanh_cube
    pooling        = one_max      one_max | k_max:K | local_max:R | local_avg:R
    dropout        = 0.5          penultimate-layer dropout rate
    dropout_conv   = 0.0          sentence-matrix dropout rate
    l2_constraint  = 3            positive number or 'none'
    embedding_mode = non_static   static | non_static
    conv_dropout_eval = retention retention | rate (test-time input scaling)
    input_repr     = word2vec     word2vec | glove | concat | onehot | random
    random_dim     = 300          vector width for input_repr = random
    minibatch      = 50
    max_epochs     = 25
    patience       = 5
    val_fraction   = 0.10
    seed           = 0
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from sentcnn.cnn import ModelConfig, Pooling
from sentcnn.corpus import Dataset
from sentcnn.embeddings import (
    EmbeddingTable,
    SentenceEncoding,
    load_glove_txt,
    load_word2vec_bin,
)
from sentcnn.ndmath import mix_seed
from sentcnn.optim import TrainConfig

INPUT_REPRS = ("word2vec", "glove", "concat", "onehot", "random")

EMBEDDING_DIR_ENV = "SENTCNN_EMBEDDING_DIR"

_SALT_OOV = 0x0E


@dataclass
class RunSettings:
    """Parsed configuration; turns into ModelConfig/TrainConfig on demand."""

    region_sizes: tuple[int, ...] = (3, 4, 5)
    feature_maps: int = 100
    activation: str = "relu"
    pooling: Pooling = field(default_factory=Pooling.one_max)
    dropout: float = 0.5
    dropout_conv: float = 0.0
    l2_constraint: float | None = 3.0
    embedding_mode: str = "non_static"
    conv_dropout_eval: str = "retention"
    input_repr: str = "word2vec"
    random_dim: int = 300
    minibatch: int = 50
    max_epochs: int = 25
    patience: int = 5
    val_fraction: float = 0.10
    seed: int = 0

    def model_config(self, num_classes: int) -> ModelConfig:
        return ModelConfig(
            num_classes=num_classes,
            region_sizes=self.region_sizes,
            maps_per_region=self.feature_maps,
            activation=self.activation,
            pooling=self.pooling,
            dropout_penult=self.dropout,
            dropout_conv=self.dropout_conv,
            l2_constraint=self.l2_constraint,
            embedding_mode=self.embedding_mode,
            conv_dropout_eval=self.conv_dropout_eval,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            minibatch=self.minibatch,
            max_epochs=self.max_epochs,
            patience=self.patience,
            val_fraction=self.val_fraction,
            seed=self.seed,
        )


def _parse_value(key: str, value: str) -> object:
    if key == "region_sizes":
        return tuple(int(v) for v in value.replace("(", "").replace(")", "").split(",") if v)
    if key in ("feature_maps", "random_dim", "minibatch", "max_epochs", "patience", "seed"):
        return int(value)
    if key in ("dropout", "dropout_conv", "val_fraction"):
        return float(value)
    if key == "l2_constraint":
        return None if value.lower() == "none" else float(value)
    if key == "pooling":
        return Pooling.parse(value)
    if key in ("activation", "embedding_mode", "conv_dropout_eval", "input_repr"):
        return value
    raise ValueError(f"unknown configuration key {key!r}")


def parse_settings(text: str) -> RunSettings:
    known = {f.name for f in fields(RunSettings)}
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key not in known:
            raise ValueError(f"line {lineno}: unknown configuration key {key!r}")
        values[key] = _parse_value(key, value)
    settings = RunSettings(**values)
    if settings.input_repr not in INPUT_REPRS:
        raise ValueError(f"unknown input_repr {settings.input_repr!r}")
    settings.model_config(num_classes=2)  # validate model fields eagerly
    settings.train_config()
    return settings


def load_settings(path: str | Path | None) -> RunSettings:
    if path is None:
        return RunSettings()
    return parse_settings(Path(path).read_text(encoding="utf-8"))


def resolve_embedding_path(path: str | Path) -> Path:
    """Resolve an embedding file against $SENTCNN_EMBEDDING_DIR when the
    given path is relative and does not exist as-is."""
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    base = os.environ.get(EMBEDDING_DIR_ENV)
    if base and (Path(base) / p).exists():
        return Path(base) / p
    return p


class EncodingBuilder:
    """Builds SentenceEncodings for any input representation at any padded
    length, loading each embedding file at most once."""

    def __init__(
        self,
        *,
        w2v_path: str | Path | None = None,
        glove_path: str | Path | None = None,
        onehot_vocab: dict[str, int] | None = None,
        random_dim: int = 300,
        seed: int = 0,
    ):
        self.w2v_path = w2v_path
        self.glove_path = glove_path
        self.onehot_vocab = onehot_vocab
        self.random_dim = random_dim
        self.seed = seed
        self._tables: dict[str, EmbeddingTable] = {}

    @classmethod
    def for_dataset(
        cls,
        dataset: Dataset,
        settings: RunSettings,
        w2v_path: str | Path | None = None,
        glove_path: str | Path | None = None,
    ) -> "EncodingBuilder":
        vocab = {w: i for i, w in enumerate(sorted(dataset.vocabulary()))}
        return cls(
            w2v_path=w2v_path,
            glove_path=glove_path,
            onehot_vocab=vocab,
            random_dim=settings.random_dim,
            seed=settings.seed,
        )

    def table(self, kind: str) -> EmbeddingTable:
        if kind not in self._tables:
            if kind == "word2vec":
                if self.w2v_path is None:
                    raise ValueError("this run needs a word2vec file (--w2v)")
                self._tables[kind] = load_word2vec_bin(resolve_embedding_path(self.w2v_path))
            else:
                if self.glove_path is None:
                    raise ValueError("this run needs a GloVe file (--glove)")
                self._tables[kind] = load_glove_txt(resolve_embedding_path(self.glove_path))
        return self._tables[kind]

    def build(self, input_repr: str, pad_to: int) -> SentenceEncoding:
        oov_seed = mix_seed(self.seed, _SALT_OOV)
        if input_repr == "word2vec":
            return SentenceEncoding.pretrained(self.table("word2vec"), pad_to, oov_seed=oov_seed)
        if input_repr == "glove":
            return SentenceEncoding.pretrained(self.table("glove"), pad_to, oov_seed=oov_seed)
        if input_repr == "concat":
            tables = [self.table("word2vec"), self.table("glove")]
            return SentenceEncoding.pretrained(tables, pad_to, oov_seed=oov_seed)
        if input_repr == "onehot":
            if not self.onehot_vocab:
                raise ValueError("one-hot encoding needs a dataset vocabulary")
            return SentenceEncoding.onehot(self.onehot_vocab, pad_to)
        if input_repr == "random":
            return SentenceEncoding.random(self.random_dim, pad_to, seed=oov_seed)
        raise ValueError(f"unknown input representation {input_repr!r}")
