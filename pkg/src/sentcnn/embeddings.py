"""Pretrained vector file formats and sentence-matrix construction.

Supports the word2vec binary layout and the GloVe text layout, plus the
input encodings used by the experiments: single pretrained table, two
concatenated tables, one-hot indicators, and per-word random vectors.

Out-of-vocabulary policy: a missing (sub-)vector is drawn once, uniformly
from ``oov_range``, from a generator seeded by ``mix_seed(oov_seed,
blake2b(word))``.  Seeding per word (rather than per encounter) makes OOV
vectors independent of the order sentences are processed in, so parallel
trials see identical encodings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from sentcnn.corpus import FormatError
from sentcnn.ndmath import Mat, Rng, mix_seed

_DEFAULT_OOV_RANGE = (-0.25, 0.25)


@dataclass
class EmbeddingTable:
    """Word -> row-index map over a dense (vocab x dim) matrix."""

    dim: int
    vocab: dict[str, int]
    vectors: Mat

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("embedding dim must be positive")
        if self.vectors.shape != (len(self.vocab), self.dim):
            raise ValueError(
                f"vector matrix {self.vectors.shape} does not match "
                f"{len(self.vocab)} words x dim {self.dim}"
            )

    def get(self, word: str) -> np.ndarray | None:
        row = self.vocab.get(word)
        return None if row is None else self.vectors[row]

    def __len__(self) -> int:
        return len(self.vocab)


def load_word2vec_bin(path: str | Path) -> EmbeddingTable:
    """Parse the word2vec binary layout.

    Header line ``"<count> <dim>\\n"`` in ASCII, then per record: word bytes
    terminated by one space, ``dim`` little-endian float32 values (widened
    to float64 here), and an optional single trailing newline.  Words that
    are not valid UTF-8 are kept via surrogate escapes.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        header = fh.readline()
        try:
            count_s, dim_s = header.split()
            count, dim = int(count_s), int(dim_s)
            if count < 0 or dim <= 0:
                raise ValueError
        except ValueError:
            raise FormatError(
                f"{path}: bad header {header!r} at offset 0; expected '<count> <dim>'",
                offset=0,
            ) from None
        vocab: dict[str, int] = {}
        vectors = np.empty((count, dim), dtype=np.float64)
        vec_bytes = 4 * dim
        for i in range(count):
            offset = fh.tell()
            word_raw = bytearray()
            while True:
                ch = fh.read(1)
                if not ch:
                    raise FormatError(
                        f"{path}: truncated while reading word {i} at offset {offset}",
                        offset=offset,
                        word_index=i,
                    )
                if ch == b" ":
                    break
                word_raw += ch
            vec_offset = fh.tell()
            buf = fh.read(vec_bytes)
            if len(buf) != vec_bytes:
                raise FormatError(
                    f"{path}: truncated vector for word {i} at offset {vec_offset}",
                    offset=vec_offset,
                    word_index=i,
                )
            tail = fh.read(1)
            if tail not in (b"\n", b""):
                fh.seek(-1, 1)
            word = word_raw.lstrip(b"\n").decode("utf-8", errors="surrogateescape")
            if word not in vocab:
                vocab[word] = len(vocab)
            vectors[vocab[word]] = np.frombuffer(buf, dtype="<f4")
    return EmbeddingTable(dim=dim, vocab=vocab, vectors=vectors[: len(vocab)].copy())


def save_word2vec_bin(table: EmbeddingTable, path: str | Path) -> None:
    """Emit exactly the layout accepted by :func:`load_word2vec_bin`.

    Values are written as float32, so ``load(save(t))`` is the identity at
    32-bit granularity.
    """
    words = sorted(table.vocab, key=table.vocab.get)
    with open(path, "wb") as fh:
        fh.write(f"{len(words)} {table.dim}\n".encode("ascii"))
        for word in words:
            fh.write(word.encode("utf-8", errors="surrogateescape"))
            fh.write(b" ")
            fh.write(table.vectors[table.vocab[word]].astype("<f4").tobytes())
            fh.write(b"\n")


def load_glove_txt(path: str | Path) -> EmbeddingTable:
    """Parse the GloVe text layout: ``word v1 v2 ... vd`` per line."""
    path = Path(path)
    vocab: dict[str, int] = {}
    rows: list[np.ndarray] = []
    dim = None
    with open(path, "r", encoding="utf-8", errors="surrogateescape") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise FormatError(f"{path}:{lineno}: expected 'word value...'", line=lineno)
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise FormatError(
                    f"{path}:{lineno}: {len(values)} values, expected {dim}", line=lineno
                )
            try:
                vec = np.array([float(v) for v in values], dtype=np.float64)
            except ValueError as e:
                raise FormatError(f"{path}:{lineno}: {e}", line=lineno) from None
            if word in vocab:
                rows[vocab[word]] = vec
                continue
            vocab[word] = len(rows)
            rows.append(vec)
    if dim is None:
        raise FormatError(f"{path}: empty embedding file")
    return EmbeddingTable(dim=dim, vocab=vocab, vectors=np.vstack(rows))


def _word_seed(base: int, word: str) -> int:
    digest = hashlib.blake2b(
        word.encode("utf-8", errors="surrogateescape"), digest_size=8
    ).digest()
    return mix_seed(base, int.from_bytes(digest, "little"))


class SentenceEncoding:
    """Policy turning a token sequence into a ``pad_to x dim`` sentence matrix.

    Construct through one of :meth:`pretrained`, :meth:`onehot` or
    :meth:`random`.  ``pad_to`` fixes the row count; rows past the last
    token are zero.
    """

    def __init__(
        self,
        mode: str,
        pad_to: int,
        *,
        tables: Sequence[EmbeddingTable] = (),
        vocab: dict[str, int] | None = None,
        dim: int | None = None,
        seed: int = 0,
        value_range: tuple[float, float] = _DEFAULT_OOV_RANGE,
    ):
        if pad_to < 1:
            raise ValueError("pad_to must be >= 1")
        if mode == "pretrained":
            if not 1 <= len(tables) <= 2:
                raise ValueError("pretrained mode takes 1 or 2 tables")
            self.dim = sum(t.dim for t in tables)
        elif mode == "onehot":
            if not vocab:
                raise ValueError("onehot mode needs a non-empty vocabulary")
            self.dim = len(vocab)
        elif mode == "random":
            if not dim or dim < 1:
                raise ValueError("random mode needs a positive dim")
            self.dim = dim
        else:
            raise ValueError(f"unknown encoding mode {mode!r}")
        self.mode = mode
        self.pad_to = pad_to
        self.tables = list(tables)
        self.vocab = vocab or {}
        self.seed = seed
        self.value_range = value_range
        self._cache: dict[str, np.ndarray] = {}

    @classmethod
    def pretrained(
        cls,
        tables: Sequence[EmbeddingTable] | EmbeddingTable,
        pad_to: int,
        *,
        oov_seed: int = 0,
        oov_range: tuple[float, float] = _DEFAULT_OOV_RANGE,
    ) -> "SentenceEncoding":
        if isinstance(tables, EmbeddingTable):
            tables = [tables]
        return cls("pretrained", pad_to, tables=tables, seed=oov_seed, value_range=oov_range)

    @classmethod
    def onehot(cls, vocab: dict[str, int] | Sequence[str], pad_to: int) -> "SentenceEncoding":
        if not isinstance(vocab, dict):
            vocab = {w: i for i, w in enumerate(vocab)}
        return cls("onehot", pad_to, vocab=vocab)

    @classmethod
    def random(
        cls,
        dim: int,
        pad_to: int,
        *,
        seed: int = 0,
        value_range: tuple[float, float] = _DEFAULT_OOV_RANGE,
    ) -> "SentenceEncoding":
        return cls("random", pad_to, dim=dim, seed=seed, value_range=value_range)

    def with_pad_to(self, pad_to: int) -> "SentenceEncoding":
        """Same policy (tables, caches and seeds shared) at another padded length."""
        if pad_to == self.pad_to:
            return self
        clone = SentenceEncoding.__new__(SentenceEncoding)
        clone.__dict__ = dict(self.__dict__)
        clone.pad_to = pad_to
        return clone

    def _random_vec(self, word: str, n: int, salt: int) -> np.ndarray:
        rng = Rng(_word_seed(mix_seed(self.seed, salt), word))
        lo, hi = self.value_range
        return rng.uniform_array(n, lo, hi)

    def vector_for(self, word: str) -> np.ndarray:
        """The encoding of one token (cached where randomness is involved)."""
        if self.mode == "onehot":
            vec = np.zeros(self.dim, dtype=np.float64)
            row = self.vocab.get(word)
            if row is not None:
                vec[row] = 1.0
            return vec
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        if self.mode == "random":
            vec = self._random_vec(word, self.dim, 0)
        else:
            parts = []
            for t_index, table in enumerate(self.tables):
                hit = table.get(word)
                parts.append(hit if hit is not None else self._random_vec(word, table.dim, t_index))
            vec = parts[0] if len(parts) == 1 else np.concatenate(parts)
        self._cache[word] = vec
        return vec


def build_sentence_matrix(tokens: Sequence[str], enc: SentenceEncoding) -> Mat:
    """Stack token encodings into a ``pad_to x dim`` matrix, zero-padded."""
    if len(tokens) > enc.pad_to:
        raise ValueError(f"{len(tokens)} tokens exceed pad_to={enc.pad_to}")
    out = np.zeros((enc.pad_to, enc.dim), dtype=np.float64)
    for i, tok in enumerate(tokens):
        out[i] = enc.vector_for(tok)
    return out
