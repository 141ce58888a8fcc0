import numpy as np
import pytest
from scipy import sparse

from sentcnn.baselines import (
    BowVectorizer,
    average_word_vector,
    featurize,
    featurize_all,
    fit_bow,
    logreg_gradient,
    logreg_objective,
    train_logreg,
    _fit,
)
from sentcnn.embeddings import EmbeddingTable
from tests.test_embeddings import make_table


class TestBowVectorizer:
    def test_counts(self):
        v = BowVectorizer.fit([["a", "b"], ["a", "c"]])
        grams = set(v.vocab)
        assert ("a",) in grams and ("a", "b") in grams and ("a", "c") in grams

    def test_frequency_cap_with_ties(self):
        corpus = [["x"] * 5 + ["y"] * 3 + ["z"]]
        v = BowVectorizer.fit(corpus, max_features=2)
        unigrams = {g for g in v.vocab if len(g) == 1}
        assert ("x",) in unigrams  # highest count always kept

    def test_cap_rule(self):
        counts = [["x", "x", "x", "x", "x"], ["y", "y", "y"], ["z"]]
        v = BowVectorizer.fit(counts, max_features=2)
        kept = set(v.vocab)
        assert ("x",) in kept and len(v) == 2

    def test_deterministic(self):
        corpus = [["a", "b", "c"], ["b", "c", "d"], ["c", "d"]]
        assert BowVectorizer.fit(corpus).vocab == BowVectorizer.fit(corpus).vocab

    def test_tie_break_lexicographic(self):
        v = BowVectorizer.fit([["b", "a"]], max_features=3)
        # all grams have count 1; lexicographic order decides the cut
        assert list(v.vocab)[:2] == [("a",), ("b",)]

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            BowVectorizer.fit([])

    def test_fit_bow_alias(self):
        corpus = [["a", "b"], ["a", "c"]]
        assert fit_bow(corpus).vocab == BowVectorizer.fit(corpus).vocab


class TestFeaturize:
    def test_bow_counts(self):
        v = BowVectorizer(vocab={("a",): 0, ("b",): 1})
        out = featurize(["a", "a", "b"], "bow", vectorizer=v)
        assert out.tolist() == [2.0, 1.0]

    def test_bow_binary(self):
        v = BowVectorizer(vocab={("a",): 0, ("b",): 1})
        out = featurize(["a", "a"], "bow", vectorizer=v, binary=True)
        assert out.tolist() == [1.0, 0.0]

    def test_avg_wv(self):
        table = EmbeddingTable(dim=2, vocab={"a": 0, "b": 1},
                               vectors=np.array([[1.0, 0.0], [0.0, 1.0]]))
        out = featurize(["a", "b"], "avg_wv", table=table)
        assert out.tolist() == [0.5, 0.5]

    def test_avg_wv_all_oov_is_zero(self):
        table = make_table(["x"], dim=3)
        assert np.array_equal(average_word_vector(["nope"], table), np.zeros(3))

    def test_concat_width(self):
        v = BowVectorizer(vocab={("a",): 0, ("b",): 1})
        table = make_table(["a"], dim=3)
        out = featurize(["a"], "bow_plus_wv", vectorizer=v, table=table)
        assert out.shape == (5,)

    def test_featurize_all_sparse(self):
        v = BowVectorizer(vocab={("a",): 0, ("b",): 1})
        x = featurize_all([["a"], ["b", "b"]], "bow", vectorizer=v)
        assert sparse.issparse(x)
        assert x.toarray().tolist() == [[1.0, 0.0], [0.0, 2.0]]

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            featurize(["a"], "tfidf")


def separable_1d(n=40):
    x = np.concatenate([np.linspace(-2, -1, n // 2), np.linspace(1, 2, n // 2)])
    y = (x > 0).astype(np.int64)
    return x.reshape(-1, 1), y


class TestLogReg:
    def test_separable_reaches_perfect_train_accuracy(self):
        x, y = separable_1d()
        model = train_logreg(x, y, l2_lambda=1e-4)
        assert np.mean(model.predict(x) == y) == 1.0

    def test_gradient_matches_finite_differences(self, np_rng):
        n, d, c = 12, 4, 3
        x = np_rng.normal(size=(n, d))
        labels = np_rng.integers(0, c, size=n)
        y = np.zeros((n, c))
        y[np.arange(n), labels] = 1.0
        w = np_rng.normal(scale=0.3, size=(c, d))
        b = np_rng.normal(scale=0.1, size=c)
        lam = 0.01
        g_w, g_b = logreg_gradient(w, b, x, y, lam)
        eps = 1e-6
        worst = 0.0
        for arr, g in ((w, g_w), (b, g_b)):
            flat, gf = arr.reshape(-1), g.reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + eps
                up = logreg_objective(w, b, x, y, lam)
                flat[j] = orig - eps
                dn = logreg_objective(w, b, x, y, lam)
                flat[j] = orig
                num = (up - dn) / (2 * eps)
                worst = max(worst, abs(num - gf[j]) / max(1.0, abs(num), abs(gf[j])))
        assert worst < 1e-6

    def test_convexity_restarts_agree(self, np_rng):
        x, y = separable_1d(30)
        x = np.hstack([x, np_rng.normal(size=(30, 2))])
        lam = 0.1
        objectives = []
        y_onehot = np.zeros((30, 2))
        y_onehot[np.arange(30), y] = 1.0
        for trial in range(5):
            w0 = np_rng.normal(scale=1.0, size=(2, 3))
            b0 = np_rng.normal(scale=1.0, size=2)
            model = _fit(x, y, 2, lam, max_iter=5000, tol=1e-9, init_w=w0, init_b=b0)
            objectives.append(logreg_objective(model.weights, model.bias, x, y_onehot, lam))
        assert max(objectives) - min(objectives) < 1e-6

    def test_regularization_shrinks_weights(self):
        x, y = separable_1d()
        norms = []
        for lam in (1e-4, 1e-2, 1.0, 100.0):
            model = train_logreg(x, y, l2_lambda=lam)
            norms.append(np.linalg.norm(model.weights))
        assert all(a >= b for a, b in zip(norms, norms[1:]))
        # extreme penalty: weights near zero, probabilities near class priors
        heavy = train_logreg(x, y, l2_lambda=1e6)
        assert np.linalg.norm(heavy.weights) < 1e-3
        probs = heavy.predict_proba(x)
        assert np.allclose(probs.mean(axis=0), [0.5, 0.5], atol=0.01)

    def test_lambda_selected_by_inner_cv(self):
        x, y = separable_1d(60)
        model = train_logreg(x, y, l2_lambda=None, seed=3)
        assert model.l2_lambda in (1e-4, 1e-3, 1e-2, 1e-1, 1.0)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            train_logreg(np.zeros((4, 2)), [1, 1, 1, 1])

    def test_sparse_input_supported(self):
        x, y = separable_1d()
        xs = sparse.csr_matrix(x)
        model = train_logreg(xs, y, l2_lambda=1e-3)
        assert np.mean(model.predict(xs) == y) == 1.0


class TestTrainOnlyVocabulary:
    def test_test_fold_ngrams_absent(self):
        train = [["seen", "words", "only"], ["more", "seen", "words"]]
        test = [["unseen", "tokens"]]
        v = BowVectorizer.fit(train)
        assert ("unseen",) not in v.vocab
        x = featurize(test[0], "bow", vectorizer=v)
        assert np.array_equal(x, np.zeros(len(v)))
