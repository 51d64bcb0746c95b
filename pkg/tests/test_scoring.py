import math

import numpy as np
import pytest

from tsm_gebd import (
    DomainError,
    ScoreCache,
    Tsm,
    boundary_scores,
    make_kernel,
    scores_for_interval,
)
from oracles import conv_scores_oracle, kernel_oracle, random_symmetric_tsm


def test_kernel_k3_exact_values():
    k = make_kernel(3)
    w = k.weights
    assert w[0, 0] == 0.5 and w[2, 2] == 0.5
    assert w[0, 2] == -0.5 and w[2, 0] == -0.5
    assert np.all(w[1, :] == 0.0) and np.all(w[:, 1] == 0.0)


def test_kernel_k5_counts_and_magnitude():
    w = make_kernel(5).weights
    nonzero = w[w != 0.0]
    assert np.all(np.abs(nonzero) == 1.0 / 8.0)
    assert np.count_nonzero(w > 0) == 8
    assert np.count_nonzero(w < 0) == 8


@pytest.mark.parametrize("size", [3, 5, 7, 9, 11])
def test_kernel_sum_exactly_zero(size):
    w = make_kernel(size).weights
    # the positive and negative cells are the same float, in equal counts,
    # so the exact sum of the weight multiset is zero; fsum computes it
    assert math.fsum(w.ravel()) == 0.0


@pytest.mark.parametrize("size", [3, 5, 7, 9])
def test_kernel_matches_quadrant_oracle(size):
    assert np.array_equal(make_kernel(size).weights, kernel_oracle(size))


def test_kernel_symmetry_and_sign_pattern():
    k = make_kernel(9)
    w, c = k.weights, k.center
    assert np.array_equal(w, w.T)
    for u in range(9):
        for v in range(9):
            if u == c or v == c:
                assert w[u, v] == 0.0
            elif (u < c) == (v < c):
                assert w[u, v] > 0.0
            else:
                assert w[u, v] < 0.0


@pytest.mark.parametrize("size", [2, 1, 4, -3])
def test_kernel_bad_size(size):
    with pytest.raises(DomainError):
        make_kernel(size)


def test_all_ones_9x9_k5_exact_pattern():
    tsm = Tsm("cosine", np.ones((9, 9)))
    scores = boundary_scores(tsm, 0, 9, make_kernel(5)).values
    expect = np.array([0.5, 0.125, 0, 0, 0, 0, 0, 0.125, 0.5])
    assert np.array_equal(scores, expect)


def test_two_block_max_attained_at_boundary():
    v = np.zeros((9, 9))
    v[:5, :5] = 1.0
    v[5:, 5:] = 1.0
    scores = boundary_scores(Tsm("cosine", v), 0, 9, make_kernel(5)).values
    assert scores[5] == scores[1:].max()
    oracle = conv_scores_oracle(v, 0, 9, 5)
    assert np.allclose(scores, oracle, atol=1e-12)


def test_scores_match_bruteforce_oracle():
    rng = np.random.default_rng(42)
    for _ in range(40):
        L = int(rng.integers(5, 24))
        v = random_symmetric_tsm(rng, L)
        size = int(rng.choice([3, 5, 7]))
        s = int(rng.integers(0, L - 1))
        e = int(rng.integers(s + 1, L + 1))
        got = boundary_scores(Tsm("cosine", v), s, e, make_kernel(size)).values
        assert np.allclose(got, conv_scores_oracle(v, s, e, size), atol=1e-12)


def test_zero_response_on_constant_interior():
    tsm = Tsm("cosine", np.full((20, 20), 1.0))
    for size in (3, 5, 7):
        c = (size - 1) // 2
        scores = boundary_scores(tsm, 0, 20, make_kernel(size)).values
        interior = scores[c:20 - c]
        assert np.allclose(interior, 0.0, atol=1e-12)


def test_translation_equivariance():
    def block_tsm(L, b):
        v = np.zeros((L, L))
        v[:b, :b] = 1.0
        v[b:, b:] = 1.0
        return v

    kernel = make_kernel(5)
    base = boundary_scores(Tsm("cosine", block_tsm(40, 15)), 0, 40, kernel).values
    for t in (1, 3, 6):
        shifted = boundary_scores(Tsm("cosine", block_tsm(40, 15 + t)), 0, 40, kernel).values
        assert int(np.argmax(shifted)) == int(np.argmax(base)) + t


def test_interval_validation():
    tsm = Tsm("cosine", np.ones((6, 6)))
    kernel = make_kernel(3)
    for s, e in [(3, 3), (4, 2), (-1, 4), (0, 7)]:
        with pytest.raises(DomainError):
            boundary_scores(tsm, s, e, kernel)


def test_cache_equivalence_and_population():
    rng = np.random.default_rng(9)
    v = random_symmetric_tsm(rng, 30)
    tsm = Tsm("cosine", v)
    kernel = make_kernel(5)
    cache = ScoreCache()
    full = scores_for_interval(cache, tsm, 0, 30, kernel)
    assert np.allclose(full.values, boundary_scores(tsm, 0, 30, kernel).values, atol=1e-15)
    # interior positions of the full pass are cached
    assert len(cache) == 30 - 2 * kernel.center
    sub = scores_for_interval(cache, tsm, 0, 17, kernel)
    assert np.allclose(sub.values, boundary_scores(tsm, 0, 17, kernel).values, atol=1e-12)


def test_cache_untouched_for_tiny_interval():
    rng = np.random.default_rng(10)
    tsm = Tsm("cosine", random_symmetric_tsm(rng, 12))
    kernel = make_kernel(5)
    cache = ScoreCache()
    out = scores_for_interval(cache, tsm, 4, 5, kernel)
    assert len(out.values) == 1
    assert len(cache) == 0
    assert np.allclose(out.values, boundary_scores(tsm, 4, 5, kernel).values, atol=1e-12)


def test_cached_interior_scores_equal_full_matrix_values():
    rng = np.random.default_rng(11)
    tsm = Tsm("cosine", random_symmetric_tsm(rng, 28))
    kernel = make_kernel(7)
    c = kernel.center
    full = boundary_scores(tsm, 0, 28, kernel).values
    cache = ScoreCache()
    sub = scores_for_interval(cache, tsm, 0, 15, kernel)
    for i in range(c, 15 - c):
        assert abs(sub.values[i] - full[i]) < 1e-12
