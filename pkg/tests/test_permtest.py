import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from resamplekit.errors import BudgetExceededError, DegenerateTableError, InvalidInputError
from resamplekit.estimators import Sample, TwoSample
from resamplekit.permtest import (
    PermutationResult,
    fisher_exact,
    independence_permutation,
    two_sample_permutation,
)


def binary_two_sample(a, b, c, d):
    """Groups of 0/1 outcomes from table [[a, b], [c, d]] (ones first)."""
    return TwoSample(Sample([1.0] * a + [0.0] * b), Sample([1.0] * c + [0.0] * d))


# ------------------------------------------------------------- two-sample

def test_tv_sampled(tv_two):
    res = two_sample_permutation(tv_two, r=9999, seed=1, mode="sampled")
    assert 0.002 <= res.p_upper <= 0.009
    assert res.p_upper == (res.count_ge + 1) / 10_000
    assert res.p_lower == (res.count_le + 1) / 10_000
    assert not res.exhaustive and res.r == 9999


def test_tv_exhaustive(tv_two):
    res = two_sample_permutation(tv_two)
    assert res.exhaustive and res.r == math.comb(20, 10)
    assert res.p_upper == res.count_ge / res.r
    assert 0.002 <= res.p_upper <= 0.009


def test_small_exhaustive():
    res = two_sample_permutation(TwoSample(Sample([1, 2]), Sample([3, 4])))
    assert res.exhaustive and res.r == 6
    assert res.observed == -2
    assert res.p_lower == 1 / 6
    assert res.p_two_sided == 1 / 3


def test_identical_groups_capped():
    res = two_sample_permutation(TwoSample(Sample([1, 2, 3]), Sample([1, 2, 3])))
    assert res.p_two_sided == 1.0
    assert res.p_lower > 0.5 and res.p_upper > 0.5


def test_ties_count_in_both_tails():
    # every relabelling of constant data ties the observed value
    res = two_sample_permutation(TwoSample(Sample([2.0, 2.0]), Sample([2.0, 2.0, 2.0])),
                                 r=99, mode="sampled")
    assert res.count_ge == res.count_le == 99
    assert res.p_lower == res.p_upper == 1.0


def test_budget_error_names_count():
    ts = TwoSample(Sample(np.arange(15.0)), Sample(np.arange(15.0) + 1))
    with pytest.raises(BudgetExceededError, match=str(math.comb(30, 15))):
        two_sample_permutation(ts, mode="exhaustive")
    assert not two_sample_permutation(ts, r=99, mode="auto").exhaustive


def test_bad_mode_and_statistic(tv_two):
    with pytest.raises(InvalidInputError):
        two_sample_permutation(tv_two, mode="all")
    with pytest.raises(InvalidInputError):
        two_sample_permutation(tv_two, "mean")


def test_permutation_determinism(tv_two):
    a = two_sample_permutation(tv_two, r=999, seed=3, mode="sampled")
    b = two_sample_permutation(tv_two, r=999, seed=3, mode="sampled", workers=2)
    assert np.array_equal(a.replicates, b.replicates)
    assert a.p_upper == b.p_upper


@given(st.lists(st.floats(-20, 20), min_size=4, max_size=30), st.integers(0, 2**32),
       st.integers(1, 200))
@settings(max_examples=40, deadline=None)
def test_sampled_p_bounds(values, seed, r):
    n1 = len(values) // 2
    ts = TwoSample(Sample(values[:n1]), Sample(values[n1:]))
    res = two_sample_permutation(ts, r=r, seed=seed, mode="sampled")
    for p in (res.p_lower, res.p_upper, res.p_two_sided):
        assert 1 / (r + 1) <= p <= 1
    assert res.p_two_sided == min(1.0, 2 * min(res.p_lower, res.p_upper))


def _pooled_t(ts):
    t = stats.ttest_ind(ts.group1.values, ts.group2.values, equal_var=True).statistic
    return float(t)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_monotone_statistic_equivalence(seed):
    rng = np.random.default_rng(seed)
    ts = TwoSample(Sample(rng.normal(0, 1, 9)), Sample(rng.normal(0.8, 1, 7)))
    a = two_sample_permutation(ts, "mean-difference", r=2000, seed=seed, mode="sampled")
    b = two_sample_permutation(ts, "t-pooled", r=2000, seed=seed, mode="sampled")
    assert (a.count_ge, a.count_le) == (b.count_ge, b.count_le)
    assert (a.p_lower, a.p_upper) == (b.p_lower, b.p_upper)
    # the first group's mean alone orders the relabellings the same way
    total = ts.pooled().sum()
    m1 = (a.replicates + total / 7) / (1 + 9 / 7)
    obs1 = ts.group1.values.mean()
    assert np.sum(m1 >= obs1 - 1e-9) == a.count_ge


def test_t_pooled_matches_scipy():
    rng = np.random.default_rng(5)
    ts = TwoSample(Sample(rng.normal(size=6)), Sample(rng.normal(size=5)))
    res = two_sample_permutation(ts, "t-pooled", mode="exhaustive")
    assert res.observed == pytest.approx(_pooled_t(ts))


@pytest.mark.parametrize("n,n1", [(4, 2), (6, 3), (7, 2), (8, 4), (8, 3)])
def test_exhaustive_p_is_uniform(n, n1):
    # over all relabellings of tie-free data, the exact P-value takes
    # each value k/m exactly once
    pooled = np.random.default_rng(n * 10 + n1).normal(size=n)
    m = math.comb(n, n1)
    ps = []
    for first in itertools.combinations(range(n), n1):
        mask = np.zeros(n, bool)
        mask[list(first)] = True
        ts = TwoSample(Sample(pooled[mask]), Sample(pooled[~mask]))
        ps.append(two_sample_permutation(ts, mode="exhaustive").p_upper)
    assert sorted(Fraction(p).limit_denominator(m) for p in ps) == [Fraction(k, m) for k in range(1, m + 1)]


# ------------------------------------------------------------ independence

def test_skating_independence(skating):
    res = independence_permutation(skating.x, skating.y, r=9999, seed=4)
    assert res.p_two_sided == 0.0002
    assert res.count_ge == 0


def test_reversed_order_exhaustive():
    res = independence_permutation([1, 2, 3], [3, 2, 1], mode="exhaustive")
    assert res.r == 6 and res.observed == pytest.approx(-1)
    assert res.p_lower == 1 / 6


def test_correlation_slope_equivalence(skating):
    x, y = skating.x, skating.y + np.random.default_rng(6).normal(0, 8, skating.n)
    a = independence_permutation(x, y, "correlation", r=3000, seed=9)
    b = independence_permutation(x, y, "ols-slope", r=3000, seed=9)
    assert (a.count_ge, a.count_le, a.p_two_sided) == (b.count_ge, b.count_le, b.p_two_sided)


def test_independence_errors():
    with pytest.raises(InvalidInputError):
        independence_permutation([1, 2], [2, 1])
    with pytest.raises(InvalidInputError):
        independence_permutation([1, 2, 3], [1, 2, 3], "r-squared")


def test_result_dict():
    res = independence_permutation([1, 2, 3, 4], [2, 1, 4, 3], r=50)
    d = res.as_dict()
    assert d["p_two_sided"] == res.p_two_sided and d["r"] == 50
    assert isinstance(res, PermutationResult)


# ------------------------------------------------------------------ Fisher

def test_fisher_symmetric():
    assert fisher_exact([[1, 1], [1, 1]])[2] == 1.0


def test_fisher_small():
    lo, hi, two = fisher_exact([[2, 0], [0, 2]])
    assert hi == pytest.approx(1 / 6)
    res = two_sample_permutation(binary_two_sample(2, 0, 0, 2), mode="exhaustive")
    assert res.p_upper == hi


def test_fisher_relative_risk_counts():
    lo, hi, two = fisher_exact([[55, 3283], [21, 2655]])
    assert hi < 0.01
    assert hi == pytest.approx(stats.fisher_exact([[55, 3283], [21, 2655]], alternative="greater")[1], rel=1e-9)


def test_fisher_errors():
    with pytest.raises(DegenerateTableError):
        fisher_exact([[0, 3], [0, 2]])
    with pytest.raises(InvalidInputError):
        fisher_exact([[1, -1], [2, 2]])
    with pytest.raises(InvalidInputError):
        fisher_exact([[1, 2, 3], [1, 2, 3]])


def _tables(max_n):
    for n in range(2, max_n + 1):
        for n1 in range(1, n):
            n2 = n - n1
            for k in range(1, n):
                for a in range(max(0, k - n2), min(k, n1) + 1):
                    yield a, n1 - a, k - a, n2 - (k - a)


def test_fisher_equals_exhaustive_small_tables():
    # the full n <= 12 sweep runs in the acceptance suite
    for a, b, c, d in _tables(7):
        res = two_sample_permutation(binary_two_sample(a, b, c, d), mode="exhaustive")
        assert (res.p_lower, res.p_upper, res.p_two_sided) == fisher_exact([[a, b], [c, d]])
