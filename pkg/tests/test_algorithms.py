import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from detmax.algorithms import (CombinatorialCapError, brute_force, brute_force_maxdet, greedy,
                               local_search, max_swap_log_gain, swap_log_gain)
from detmax.geometry import NEG_INF, PointSet, linear_oracle, log_volume

ADVERSARIAL = [[1.01, 0.0], [0.9, 0.436], [0.9, -0.436]]


def det_volumes(X, k):
    """{subset: VOL} for every k-subset, via numpy det of the Gram matrix."""
    X = np.asarray(X, float)
    out = {}
    for S in itertools.combinations(range(len(X)), k):
        M = X[list(S)]
        out[S] = math.sqrt(max(np.linalg.det(M @ M.T), 0.0))
    return out


def random_instance(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 5))
    d = int(rng.integers(k, 9))
    n = int(rng.integers(k, 13))
    return rng.standard_normal((n, d)) * rng.uniform(0.2, 3.0, size=(n, 1)), k


# -- greedy --------------------------------------------------------------------

def test_greedy_k1_is_max_norm():
    cs = greedy(PointSet([[3, 0], [0, 2], [1, 1]]), 1)
    assert cs.indices == (0,)
    assert cs.swap_count == 0


def test_greedy_k2_example_against_enumeration():
    X = [[3, 0], [0, 2], [1, 1]]
    vols = det_volumes(X, 2)
    assert vols[(0, 1)] == pytest.approx(6)
    assert vols[(0, 2)] == pytest.approx(3)
    assert vols[(1, 2)] == pytest.approx(2)
    cs = greedy(PointSet(X), 2)
    assert cs.indices == (0, 1)
    assert math.exp(cs.log_volume) == pytest.approx(6.0, rel=1e-12)


def test_greedy_collinear_is_degenerate():
    cs = greedy(PointSet([[1, 1], [2, 2], [-3, -3]]), 2)
    assert cs.log_volume == NEG_INF
    assert cs.degenerate
    # max norm first, then the lowest remaining index on the tie
    assert cs.indices == (2, 0)


def test_greedy_fewer_points_than_k():
    cs = greedy(PointSet([[1, 0], [0, 1]]), 3)
    assert sorted(cs.indices) == [0, 1]
    assert cs.degenerate


def test_greedy_ties_lowest_index():
    cs = greedy(PointSet([[1, 0], [0, 1], [-1, 0], [0, -1]]), 2)
    assert cs.indices == (0, 1)


def test_greedy_errors():
    with pytest.raises(ValueError):
        greedy(PointSet(np.zeros((0, 2))), 1)
    with pytest.raises(ValueError):
        greedy(PointSet([[1.0]]), 0)


def test_greedy_oracle_query_budget():
    X = np.random.default_rng(0).standard_normal((100, 8))
    orc = linear_oracle(X)
    greedy(orc, 5)
    # n squared norms + one column per step + the final k x k Gram
    assert orc.query_count <= 100 * 6 + 25


# -- local search ----------------------------------------------------------------

def test_local_search_k1():
    cs = local_search(PointSet([[3, 0], [0, 2], [1, 1]]), 1)
    assert cs.indices == (0,)
    assert cs.swap_count == 0


def test_local_search_adversarial_example():
    vols = det_volumes(ADVERSARIAL, 2)
    best = max(vols, key=vols.get)
    assert best == (1, 2)
    assert vols[(1, 2)] / vols[(0, 1)] > 1 + 1e-5

    ps = PointSet(ADVERSARIAL)
    gd = greedy(ps, 2)
    assert gd.indices == (0, 1)
    assert math.exp(gd.log_volume) == pytest.approx(0.44036, rel=1e-9)
    ls = local_search(ps, 2, eps=1e-5)
    assert sorted(ls.indices) == [1, 2]
    assert ls.swap_count == 1
    assert math.exp(ls.log_volume) == pytest.approx(0.7848, rel=1e-9)


def test_local_search_no_swaps_when_greedy_optimal():
    checked = 0
    for seed in range(60):
        X, k = random_instance(seed)
        ps = PointSet(X)
        gd = greedy(ps, k)
        _, opt = brute_force_maxdet(ps, k)
        if gd.log_volume == opt:
            assert local_search(ps, k).swap_count == 0
            checked += 1
    assert checked > 10


def test_local_search_degenerate_returns_greedy():
    ps = PointSet([[1, 1], [2, 2], [3, 3.0]])
    ls = local_search(ps, 2)
    assert ls.degenerate and ls.swap_count == 0
    assert ls.indices == greedy(ps, 2).indices


def test_local_search_rejects_bad_eps():
    with pytest.raises(ValueError):
        local_search(PointSet([[1.0]]), 1, eps=0)


def test_local_search_termination_certificate():
    X = np.random.default_rng(8).standard_normal((60, 6))
    ps = PointSet(X)
    for eps in (1e-5, 0.1):
        cs = local_search(ps, 4, eps)
        gain, _, _ = max_swap_log_gain(ps, cs.indices)
        assert gain < math.log1p(eps) - 1e-12


def test_local_search_oracle_mode_matches():
    X = np.random.default_rng(4).standard_normal((40, 5))
    assert local_search(linear_oracle(X), 4).indices == local_search(PointSet(X), 4).indices


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_local_search_dominates_greedy(seed):
    X, k = random_instance(seed)
    ps = PointSet(X)
    gd, ls = greedy(ps, k), local_search(ps, k)
    assert ls.log_volume >= gd.log_volume - 1e-12
    assert len(set(ls.indices)) == len(ls.indices) == min(k, len(X))
    assert ls.log_volume == pytest.approx(log_volume(ps, ls.indices), abs=1e-9)
    bound = math.lgamma(k + 1) / math.log1p(ls.eps) + 1
    assert ls.swap_count <= bound


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_greedy_within_k_factorial(seed):
    X, k = random_instance(seed)
    ps = PointSet(X)
    _, opt = brute_force_maxdet(ps, k)
    assert greedy(ps, k).log_volume >= opt - math.lgamma(k + 1) - 1e-9


def test_determinism():
    X = np.random.default_rng(12).standard_normal((80, 7))
    a, b = local_search(PointSet(X), 5), local_search(PointSet(X.copy()), 5)
    assert a == b


# -- swap_log_gain ---------------------------------------------------------------

def test_swap_gain_identical_point_is_zero():
    ps = PointSet([[1, 0], [0, 1], [0, 1]])
    assert swap_log_gain(ps, [0, 1], 1, 2) == 0.0


def test_swap_gain_scaled_row():
    ps = PointSet([[1, 0], [0, 1], [0, 2]])
    assert swap_log_gain(ps, [0, 1], 1, 2) == pytest.approx(math.log(2), abs=1e-15)


def test_swap_gain_random_against_det():
    X = np.random.default_rng(6).standard_normal((4, 3))
    vols = det_volumes(X, 2)
    g = swap_log_gain(PointSet(X), [0, 1], 0, 3)
    assert g == pytest.approx(math.log(vols[(1, 3)] / vols[(0, 1)]), rel=1e-9)


def test_swap_gain_from_zero_volume():
    ps = PointSet([[1, 0], [2, 0], [0, 1]])
    assert swap_log_gain(ps, [0, 1], 1, 2) == math.inf


def test_swap_gain_misuse():
    ps = PointSet([[1, 0], [0, 1], [1, 1]])
    with pytest.raises(ValueError):
        swap_log_gain(ps, [0, 1], 2, 0)
    with pytest.raises(ValueError):
        swap_log_gain(ps, [0, 1], 0, 1)


# -- brute force --------------------------------------------------------------------

def test_brute_force_example():
    idx, lv = brute_force_maxdet(PointSet([[3, 0], [0, 2], [1, 1]]), 2)
    assert idx == [0, 1]
    assert lv == pytest.approx(math.log(6), abs=1e-12)


def test_brute_force_full_subset_and_rank_deficient():
    X = [[1, 0, 0], [0, 1, 0], [1, 1, 0]]
    idx, lv = brute_force_maxdet(PointSet(X), 3)
    assert idx == [0, 1, 2] and lv == NEG_INF
    idx, lv = brute_force_maxdet(PointSet([[1, 0], [0, 2]]), 2)
    assert idx == [0, 1] and lv == pytest.approx(math.log(2))


def test_brute_force_lexicographic_ties():
    idx, _ = brute_force_maxdet(PointSet([[1, 0], [0, 1], [-1, 0], [0, -1]]), 2)
    assert idx == [0, 1]


def test_brute_force_matches_enumeration():
    for seed in range(25):
        X, k = random_instance(seed)
        vols = det_volumes(X, k)
        best = max(vols.values())
        idx, lv = brute_force_maxdet(PointSet(X), k)
        if best > 1e-6:
            assert math.exp(lv) == pytest.approx(best, rel=1e-8)
            assert vols[tuple(idx)] == pytest.approx(best, rel=1e-8)


def test_brute_force_cap():
    with pytest.raises(CombinatorialCapError):
        brute_force_maxdet(PointSet(np.ones((30, 3))), 10, cap=1000)
    assert brute_force(PointSet([[1.0, 0], [0, 1]]), 2).algorithm == "brute-force"
