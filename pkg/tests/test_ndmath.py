import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sentcnn.ndmath import Rng, constrain_l2, cross_entropy, mix_seed, softmax, uniform_fill


class TestRng:
    def test_equal_seeds_equal_streams(self):
        a, b = Rng(12345), Rng(12345)
        assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]

    def test_different_seeds_diverge(self):
        a, b = Rng(1), Rng(2)
        assert [a.random() for _ in range(1000)] != [b.random() for _ in range(1000)]

    def test_random_in_unit_interval(self):
        r = Rng(7)
        xs = r.random_array(10_000)
        assert xs.min() >= 0.0 and xs.max() < 1.0

    def test_bulk_matches_scalar_path(self):
        a, b = Rng(5), Rng(5)
        assert np.array_equal(a.random_array(64), np.array([b.random() for _ in range(64)]))

    def test_child_independent_of_consumption(self):
        a = Rng(9)
        a.random_array(17)
        assert a.child(3).state == Rng(9).child(3).state

    def test_clone_preserves_stream(self):
        a = Rng(11)
        a.random_array(5)
        c = a.clone()
        assert a.random_array(10).tolist() == c.random_array(10).tolist()

    def test_shuffle_and_sample_deterministic(self):
        xs, ys = list(range(20)), list(range(20))
        Rng(4).shuffle(xs)
        Rng(4).shuffle(ys)
        assert xs == ys and sorted(xs) == list(range(20))
        assert Rng(4).sample(10, 4) == Rng(4).sample(10, 4)
        picked = Rng(8).sample(50, 50)
        assert sorted(picked) == list(range(50))

    def test_mix_seed_spreads(self):
        seeds = {mix_seed(42, salt) for salt in range(1000)}
        assert len(seeds) == 1000


class TestUniformFill:
    def test_deterministic(self):
        m1 = uniform_fill(np.empty((3, 4)), Rng(42), 0.0, 1.0)
        m2 = uniform_fill(np.empty((3, 4)), Rng(42), 0.0, 1.0)
        assert np.array_equal(m1, m2)

    def test_range_containment(self):
        m = uniform_fill(np.empty((20, 20)), Rng(1), -0.25, 0.25)
        assert m.min() >= -0.25 and m.max() < 0.25

    def test_law_of_large_numbers(self):
        # oracle: sample mean of 1e5 uniforms on [0,1) concentrates at 0.5
        m = uniform_fill(np.empty((100_000, 1)), Rng(3), 0.0, 1.0)
        assert abs(m.mean() - 0.5) < 0.01

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            uniform_fill(np.empty(4).reshape(2, 2), Rng(0), 1.0, 1.0)
        with pytest.raises(ValueError):
            uniform_fill(np.empty(4).reshape(2, 2), Rng(0), 0.0, math.inf)


class TestSoftmax:
    def test_symmetry(self):
        assert np.allclose(softmax([0.0, 0.0]), [0.5, 0.5])

    def test_shift_invariance_large(self):
        out = softmax([1000.0, 1000.0])
        assert np.allclose(out, [0.5, 0.5]) and np.all(np.isfinite(out))

    def test_closed_form(self):
        # oracle: e^x / sum e^x with x = (ln 1, ln 3)
        assert np.allclose(softmax([math.log(1.0), math.log(3.0)]), [0.25, 0.75], atol=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            softmax([])

    def test_sums_to_one_many_random(self, np_rng):
        for _ in range(10_000):
            x = np_rng.normal(scale=50.0, size=np_rng.integers(1, 8))
            assert abs(softmax(x).sum() - 1.0) <= 1e-12

    def test_shift_invariance_random(self, np_rng):
        for _ in range(200):
            x = np_rng.normal(size=5)
            k = np_rng.normal(scale=100.0)
            assert np.all(np.abs(softmax(x + k) - softmax(x)) <= 1e-12)


class TestCrossEntropy:
    def test_perfect_prediction(self):
        assert cross_entropy([1.0, 0.0], 0) == 0.0

    def test_uniform(self):
        assert cross_entropy([0.5, 0.5], 1) == pytest.approx(math.log(2), abs=1e-12)

    def test_clamp(self):
        assert cross_entropy([1e-15, 1.0 - 1e-15], 0) == pytest.approx(-math.log(1e-12))

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            cross_entropy([0.5, 0.5], 2)


class TestConstrainL2:
    def test_exact_rescale(self):
        assert np.allclose(constrain_l2(np.array([3.0, 4.0]), 3.0), [1.8, 2.4])

    def test_below_threshold_identity(self):
        v = np.array([1.0, 0.0])
        out = constrain_l2(v, 3.0)
        assert out is v

    def test_zero_vector(self):
        assert np.array_equal(constrain_l2(np.array([0.0, 0.0]), 3.0), [0.0, 0.0])

    def test_invalid_threshold(self):
        with pytest.raises(ValueError):
            constrain_l2(np.array([1.0]), 0.0)

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=8),
        st.floats(1e-6, 1e3),
    )
    def test_norm_never_exceeds(self, values, c):
        out = np.asarray(constrain_l2(np.array(values), c))
        assert np.linalg.norm(out) <= c + 1e-9
