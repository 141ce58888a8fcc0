"""Text preprocessing, dataset loading, class balancing and fixed fold plans."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from sentcnn.ndmath import Rng

log = logging.getLogger(__name__)


class FormatError(Exception):
    """A file did not match its declared on-disk format.

    Carries the failure location when known: ``offset`` (byte position),
    ``word_index`` (record number in binary embedding files) or ``line``.
    """

    def __init__(
        self,
        message: str,
        *,
        offset: int | None = None,
        word_index: int | None = None,
        line: int | None = None,
    ):
        super().__init__(message)
        self.offset = offset
        self.word_index = word_index
        self.line = line


# Tokenizer rule table (normative for this repo so vocabularies are
# bit-stable): lowercase; strip everything but ASCII alphanumerics and
# ' , ! ? ( ); split the six clitics 's 've n't 're 'd 'll into their own
# tokens; set off , ! ? ( ) as single-character tokens; collapse whitespace.
_STRIP_RE = re.compile(r"[^a-z0-9(),!?']")
_CLITICS = ("'s", "'ve", "n't", "'re", "'d", "'ll")
_PUNCT_RE = re.compile(r"([,!?()])")


def clean_text(raw: str) -> list[str]:
    """Tokenize one sentence according to the repo's fixed rule table.

    May return an empty list; callers drop sentences that clean to nothing.
    """
    s = _STRIP_RE.sub(" ", raw.lower())
    for clitic in _CLITICS:
        s = s.replace(clitic, " " + clitic)
    s = _PUNCT_RE.sub(r" \1 ", s)
    return s.split()


@dataclass(frozen=True)
class LabeledSentence:
    tokens: tuple[str, ...]
    label: int


@dataclass
class Dataset:
    """Immutable-by-convention labeled corpus with precomputed length stats."""

    sentences: list[LabeledSentence]
    class_names: list[str]
    max_len: int = field(init=False)
    avg_len: float = field(init=False)

    def __post_init__(self):
        if not self.sentences:
            raise ValueError("dataset has no sentences")
        counts = self.class_counts()
        for c, name in enumerate(self.class_names):
            if counts[c] == 0:
                raise ValueError(f"class {name!r} has no examples")
        lengths = [len(s.tokens) for s in self.sentences]
        self.max_len = max(lengths)
        self.avg_len = sum(lengths) / len(lengths)

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> list[int]:
        counts = [0] * len(self.class_names)
        for s in self.sentences:
            if not 0 <= s.label < len(self.class_names):
                raise ValueError(f"label {s.label} out of range")
            counts[s.label] += 1
        return counts

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.sentences], dtype=np.int64)

    def vocabulary(self) -> list[str]:
        """Unique tokens in first-occurrence order."""
        seen: dict[str, None] = {}
        for s in self.sentences:
            for t in s.tokens:
                seen.setdefault(t, None)
        return list(seen)


def _read_lines(path: str | Path) -> list[str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError:
        raise
    except UnicodeDecodeError as e:
        raise FormatError(f"{path}: not valid UTF-8: {e}") from e
    return text.splitlines()


def _sentences_from(
    lines: Iterable[tuple[str, int]], source: str
) -> list[LabeledSentence]:
    out = []
    dropped = 0
    for text, label in lines:
        tokens = clean_text(text)
        if not tokens:
            dropped += 1
            continue
        out.append(LabeledSentence(tuple(tokens), label))
    if dropped:
        log.warning("%s: dropped %d sentence(s) that cleaned to zero tokens", source, dropped)
    return out


def load_dataset(
    paths: Sequence[str | Path] | str | Path,
    fmt: str,
    class_names: Sequence[str] | None = None,
) -> Dataset:
    """Load a corpus in one of the three supported layouts.

    ``polarity-pair``: two plain-text files ``(positive, negative)``, one
    sentence per line; the positive file gets label 1.
    ``trec``: one example per line, ``LABEL:finelabel text...``; only the
    coarse label before the first ':' is kept.
    ``tsv``: ``label<TAB>text`` per line, no header.

    ``class_names`` optionally pins the label set for trec/tsv; lines with a
    label outside it raise :class:`FormatError`.
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    if fmt == "polarity-pair":
        if len(paths) != 2:
            raise ValueError("polarity-pair needs exactly (positive, negative) paths")
        pos_path, neg_path = paths
        pairs = [(line, 0) for line in _read_lines(neg_path) if line.strip()]
        pairs += [(line, 1) for line in _read_lines(pos_path) if line.strip()]
        return Dataset(
            _sentences_from(pairs, f"{pos_path},{neg_path}"),
            class_names=["negative", "positive"],
        )

    if fmt not in ("trec", "tsv"):
        raise ValueError(f"unknown dataset format {fmt!r}")
    if len(paths) != 1:
        raise ValueError(f"{fmt} format takes a single input file")
    path = paths[0]
    raw: list[tuple[str, str]] = []  # (label, text)
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        if fmt == "trec":
            head, _, text = line.partition(" ")
            label = head.split(":", 1)[0]
            if not label or not text.strip():
                raise FormatError(f"{path}:{lineno}: malformed trec line")
        else:
            label, sep, text = line.partition("\t")
            if not sep:
                raise FormatError(f"{path}:{lineno}: expected label<TAB>text")
        raw.append((label, text))

    if class_names is None:
        names = sorted({label for label, _ in raw})
    else:
        names = list(class_names)
        unknown = {label for label, _ in raw} - set(names)
        if unknown:
            raise FormatError(f"{path}: unknown label(s) {sorted(unknown)}")
    index = {name: i for i, name in enumerate(names)}
    pairs = [(text, index[label]) for label, text in raw]
    return Dataset(_sentences_from(pairs, str(path)), class_names=names)


def undersample_balance(dataset: Dataset, rng: Rng) -> Dataset:
    """Downsample every class (without replacement) to the minority count.

    The surviving examples are re-shuffled with ``rng`` so class blocks from
    the original file order do not persist.
    """
    counts = dataset.class_counts()
    if len(counts) < 2:
        raise ValueError("balancing needs at least two classes")
    target = min(counts)
    kept: list[int] = []
    for c in range(dataset.num_classes):
        idxs = [i for i, s in enumerate(dataset.sentences) if s.label == c]
        chosen = rng.sample(len(idxs), target)
        kept.extend(idxs[j] for j in sorted(chosen))
    rng.shuffle(kept)
    return Dataset([dataset.sentences[i] for i in kept], list(dataset.class_names))


@dataclass(frozen=True)
class FoldPlan:
    """A fixed stratified partition into k folds, identified by its seed."""

    k: int
    assignment: np.ndarray  # fold index per example
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)


def stratified_assignment(labels: Sequence[int], k: int, rng: Rng) -> np.ndarray:
    """Per-example fold indices; within each class fold sizes differ by <= 1."""
    labels = np.asarray(labels, dtype=np.int64)
    assignment = np.full(len(labels), -1, dtype=np.int64)
    for c in sorted(set(labels.tolist())):
        idxs = np.flatnonzero(labels == c).tolist()
        rng.shuffle(idxs)
        for pos, i in enumerate(idxs):
            assignment[i] = pos % k
    return assignment


def make_folds(dataset: Dataset, k: int, seed: int) -> FoldPlan:
    """Build the fixed fold plan reused across every replication of a run."""
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    counts = dataset.class_counts()
    for c, n in enumerate(counts):
        if n < k:
            raise ValueError(
                f"class {dataset.class_names[c]!r} has {n} examples, fewer than k={k}"
            )
    assignment = stratified_assignment(dataset.labels(), k, Rng(seed))
    return FoldPlan(k=k, assignment=assignment, seed=seed)
