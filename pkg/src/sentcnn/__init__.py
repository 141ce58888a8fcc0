"""One-layer convolutional sentence classifier with a replicated-CV sweep harness.

The package is organised as a small library plus a CLI (``sentcnn``):

- :mod:`sentcnn.ndmath` -- deterministic numeric kernels (matrices, PRNG,
  softmax, cross-entropy, l2 rescaling).
- :mod:`sentcnn.corpus` -- text cleaning, dataset loading, class balancing
  and fixed stratified fold plans.
- :mod:`sentcnn.embeddings` -- pretrained vector file formats and sentence
  matrix construction (word2vec/GloVe/concatenated/one-hot/random).
- :mod:`sentcnn.cnn` -- the model itself: convolution, activation, pooling,
  dropout, softmax, and the exact manual backward pass.
- :mod:`sentcnn.optim` -- ADADELTA and the early-stopping training loop.
- :mod:`sentcnn.evaluation` -- accuracy/AUC, cross-validation and
  replication reporting.
- :mod:`sentcnn.baselines` -- bag-of-n-grams / averaged-vector logistic
  regression reference models.
- :mod:`sentcnn.sweep`, :mod:`sentcnn.report`, :mod:`sentcnn.cli` -- the
  experiment runner, report/figure rendering and the command line.
"""

from sentcnn.cnn import ModelConfig, Pooling
from sentcnn.corpus import Dataset, LabeledSentence, load_dataset, make_folds
from sentcnn.embeddings import SentenceEncoding, build_sentence_matrix
from sentcnn.evaluation import ReplicationReport, replicate_cv, run_cv
from sentcnn.ndmath import Rng, constrain_l2, cross_entropy, mix_seed, softmax
from sentcnn.optim import TrainConfig, train_fold

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "LabeledSentence",
    "ModelConfig",
    "Pooling",
    "ReplicationReport",
    "Rng",
    "SentenceEncoding",
    "TrainConfig",
    "build_sentence_matrix",
    "constrain_l2",
    "cross_entropy",
    "load_dataset",
    "make_folds",
    "mix_seed",
    "replicate_cv",
    "run_cv",
    "softmax",
    "train_fold",
    "__version__",
]
