"""Kernel tests: closed forms, independent oracles, and stream determinism."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from refgame.numerics import (
    ZeroVectorWarning,
    cosine,
    greedy_index,
    make_rng,
    matmul,
    sample_categorical,
    sigmoid,
    sigmoid_prime,
    softmax,
    softmax_vjp,
    spawn_rngs,
)


def matmul_reference(a, b):
    """Independent triple-loop product used as the oracle."""
    n, k = a.shape
    k2, m = b.shape
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


class TestMatmul:
    def test_identity(self):
        rng = make_rng(0)
        m = rng.normal(size=(3, 5))
        assert np.allclose(matmul(np.eye(3), m), m)

    def test_hand_product(self):
        out = matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))
        assert out.shape == (1, 1)
        assert out[0, 0] == 11.0

    def test_against_triple_loop(self):
        rng = make_rng(1)
        a = rng.normal(size=(4, 5))
        b = rng.normal(size=(5, 3))
        assert np.abs(matmul(a, b) - matmul_reference(a, b)).max() < 1e-12

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.zeros((2, 3)), np.zeros((2, 2)))

    def test_associativity(self):
        rng = make_rng(2)
        for _ in range(10):
            a = rng.normal(size=(4, 6))
            b = rng.normal(size=(6, 3))
            c = rng.normal(size=(3, 5))
            left = matmul(matmul(a, b), c)
            right = matmul(a, matmul(b, c))
            assert np.linalg.norm(left - right) / np.linalg.norm(right) < 1e-9

    def test_nonfinite_result_rejected(self):
        big = np.full((1, 1), 1e308)
        with pytest.raises(ValueError, match="non-finite"):
            matmul(big, big)


class TestSigmoid:
    def test_zero(self):
        assert sigmoid(0.0) == 0.5

    def test_symmetry(self):
        for x in (0.3, 1.7, 9.0):
            assert sigmoid(x) + sigmoid(-x) == pytest.approx(1.0, abs=1e-15)

    def test_known_value(self):
        assert sigmoid(2.0) == pytest.approx(0.8807970779778823, abs=1e-12)

    def test_saturates_without_warnings(self):
        assert sigmoid(1000.0) == 1.0
        assert sigmoid(-1000.0) == 0.0

    def test_monotone(self):
        xs = np.linspace(-20, 20, 101)
        ys = sigmoid(xs)
        assert (np.diff(ys) >= 0).all()

    def test_prime_matches_finite_differences(self):
        rng = make_rng(3)
        xs = rng.uniform(-2, 2, size=50)
        eps = 1e-5
        fd = (sigmoid(xs + eps) - sigmoid(xs - eps)) / (2 * eps)
        assert np.abs(sigmoid_prime(xs) - fd).max() < 1e-4 * max(1.0, np.abs(fd).max())


class TestSoftmax:
    def test_uniform_cases(self):
        assert np.allclose(softmax([0.0, 0.0]), [0.5, 0.5])
        for c in (-3.0, 0.0, 41.5):
            assert np.allclose(softmax([c] * 4), [0.25] * 4)

    def test_known_value(self):
        out = softmax([1.0, 2.0, 3.0])
        assert np.abs(out - [0.09003057, 0.24472847, 0.66524096]).max() < 1e-5

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            softmax([])

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=24))
    @settings(max_examples=200, deadline=None)
    def test_sums_to_one_and_positive(self, logits):
        p = softmax(logits)
        assert abs(p.sum() - 1.0) < 1e-9
        assert (p >= 0).all()

    @given(
        st.lists(st.floats(-50, 50), min_size=2, max_size=12),
        st.floats(-100, 100),
    )
    @settings(max_examples=200, deadline=None)
    def test_shift_invariance(self, logits, c):
        a = softmax(logits)
        b = softmax(np.asarray(logits) + c)
        assert np.abs(a - b).max() < 1e-12

    def test_vjp_matches_finite_differences(self):
        rng = make_rng(4)
        logits = rng.uniform(-2, 2, size=6)
        u = rng.normal(size=6)
        p = softmax(logits)
        analytic = softmax_vjp(p, u)
        eps = 1e-5
        fd = np.zeros(6)
        for i in range(6):
            d = np.zeros(6)
            d[i] = eps
            fd[i] = (softmax(logits + d) @ u - softmax(logits - d) @ u) / (2 * eps)
        assert np.linalg.norm(analytic - fd) / np.linalg.norm(fd) < 1e-4


class TestSampleCategorical:
    def test_degenerate(self):
        rng = make_rng(5)
        assert all(sample_categorical([1.0, 0.0], rng) == 0 for _ in range(100))
        assert all(sample_categorical([0.0, 0.0, 1.0], rng) == 2 for _ in range(100))

    def test_fair_coin_frequency(self):
        rng = make_rng(6)
        n = 100_000
        zeros = sum(sample_categorical([0.5, 0.5], rng) == 0 for _ in range(n))
        assert 0.494 <= zeros / n <= 0.506  # 3 sigma for a fair binomial

    def test_seed_determinism(self):
        p = [0.2, 0.3, 0.5]
        rng1, rng2 = make_rng(7), make_rng(7)
        seq1 = [sample_categorical(p, rng1) for _ in range(200)]
        seq2 = [sample_categorical(p, rng2) for _ in range(200)]
        assert seq1 == seq2

    def test_advances_rng_by_one_draw(self):
        rng1, rng2 = make_rng(8), make_rng(8)
        sample_categorical([0.5, 0.5], rng1)
        rng2.random()
        assert rng1.random() == rng2.random()

    def test_non_normalized_rejected(self):
        rng = make_rng(9)
        with pytest.raises(ValueError, match="sum"):
            sample_categorical([0.5, 0.6], rng)
        with pytest.raises(ValueError, match="negative"):
            sample_categorical([1.5, -0.5], rng)

    def test_chi_square_over_18_categories(self):
        rng = make_rng(10)
        p = make_rng(11).dirichlet(np.ones(18))
        n = 100_000
        counts = np.zeros(18)
        for _ in range(n):
            counts[sample_categorical(p, rng)] += 1
        result = stats.chisquare(counts, f_exp=p * n)
        assert result.pvalue > 0.01

    def test_greedy_index_ties_to_lowest(self):
        assert greedy_index([0.25, 0.25, 0.25, 0.25]) == 0
        assert greedy_index([0.1, 0.8, 0.1]) == 1


class TestCosine:
    def test_self_similarity(self):
        v = np.array([0.3, -1.2, 4.0])
        assert cosine(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_one_hots(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_known_value(self):
        assert cosine([1.0, 1.0], [1.0, 0.0]) == pytest.approx(0.7071067811865475, abs=1e-9)

    def test_zero_vector_warns_and_returns_zero(self):
        with pytest.warns(ZeroVectorWarning):
            assert cosine([0.0, 0.0], [1.0, 2.0]) == 0.0

    def test_range(self):
        rng = make_rng(12)
        for _ in range(100):
            u = rng.normal(size=5)
            v = rng.normal(size=5)
            assert -1.0 <= cosine(u, v) <= 1.0


class TestRngStreams:
    def test_same_seed_same_sequence(self):
        a = make_rng(123).random(100)
        b = make_rng(123).random(100)
        assert np.array_equal(a, b)

    def test_spawned_streams_differ(self):
        streams = spawn_rngs(99, 3)
        draws = [r.random(10) for r in streams]
        assert not np.array_equal(draws[0], draws[1])
        assert not np.array_equal(draws[1], draws[2])

    def test_spawn_deterministic(self):
        a = [r.random(5) for r in spawn_rngs(5, 4)]
        b = [r.random(5) for r in spawn_rngs(5, 4)]
        for x, y in zip(a, b):
            assert np.array_equal(x, y)
