"""Shared synthetic-corpus fixtures."""

import numpy as np
import pytest

from sentcnn.corpus import Dataset, LabeledSentence
from sentcnn.ndmath import Rng

POS_WORDS = ["alpha", "bravo", "charlie", "delta"]
NEG_WORDS = ["xray", "yankee", "zulu", "whiskey"]
FILL_WORDS = ["one", "two", "three", "four", "five", "six"]


def make_separable_corpus(n: int = 20, seed: int = 99) -> Dataset:
    """Perfectly separable two-class corpus: label decided by a keyword."""
    rng = Rng(seed)
    sents = []
    for i in range(n // 2):
        for label, words in ((1, POS_WORDS), (0, NEG_WORDS)):
            kw = words[rng.randbelow(len(words))]
            toks = [FILL_WORDS[rng.randbelow(len(FILL_WORDS))] for _ in range(3)]
            toks.insert(rng.randbelow(len(toks) + 1), kw)
            sents.append(LabeledSentence(tuple(toks), label))
    return Dataset(sents, ["neg", "pos"])


def make_noisy_corpus(n: int = 60, noise_every: int = 8, seed: int = 17) -> Dataset:
    """Keyword-separable corpus with every ``noise_every``-th label flipped."""
    rng = Rng(seed)
    sents = []
    for i in range(n // 2):
        flip = i % noise_every == noise_every - 1
        for label, words in ((1, POS_WORDS), (0, NEG_WORDS)):
            kw = words[rng.randbelow(len(words))]
            toks = [FILL_WORDS[rng.randbelow(len(FILL_WORDS))] for _ in range(2 + rng.randbelow(3))]
            toks.insert(rng.randbelow(len(toks) + 1), kw)
            sents.append(LabeledSentence(tuple(toks), (1 - label) if flip else label))
    return Dataset(sents, ["neg", "pos"])


@pytest.fixture
def separable_corpus() -> Dataset:
    return make_separable_corpus()


@pytest.fixture
def noisy_corpus() -> Dataset:
    return make_noisy_corpus()


@pytest.fixture
def np_rng() -> np.random.Generator:
    return np.random.default_rng(20240901)
