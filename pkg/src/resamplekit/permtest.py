"""Permutation tests and Fisher's exact test.

Sampled P-values count the observed arrangement as one of the
resamples, ``(x + 1) / (r + 1)``; exhaustive P-values are exact tail
fractions. Replicates equal to the observed value count in both tails,
and the two-sided P-value is twice the smaller one-sided value, capped
at 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from . import _parallel
from .errors import (
    BudgetExceededError,
    DegenerateError,
    DegenerateTableError,
    DistributionDegenerateError,
    InvalidInputError,
)
from .estimators import (
    PairedSample,
    Sample,
    StatisticSpec,
    TwoSample,
    evaluate,
)
from .sampling import RandomSource

__all__ = [
    "PermutationResult",
    "EXHAUSTIVE_BUDGET",
    "two_sample_permutation",
    "independence_permutation",
    "fisher_exact",
]

EXHAUSTIVE_BUDGET = 10**6
DEFAULT_R = 9999


@dataclass(frozen=True)
class PermutationResult:
    observed: float
    replicates: np.ndarray
    count_ge: int
    count_le: int
    p_lower: float
    p_upper: float
    p_two_sided: float
    exhaustive: bool
    r: int
    n_excluded: int = 0

    @property
    def mc_se(self) -> float:
        """Approximate Monte Carlo SE of the smaller one-sided P-value (0 if exhaustive)."""
        if self.exhaustive:
            return 0.0
        p = min(self.p_lower, self.p_upper)
        return math.sqrt(p * (1 - p) / self.r)

    def as_dict(self) -> dict:
        return {
            "observed": self.observed,
            "r": self.r,
            "exhaustive": self.exhaustive,
            "count_ge": self.count_ge,
            "count_le": self.count_le,
            "p_lower": self.p_lower,
            "p_upper": self.p_upper,
            "p_two_sided": self.p_two_sided,
            "mc_se": self.mc_se,
            "n_excluded": self.n_excluded,
        }


def _tie_tol(observed):
    # replicates that differ from the observed value only by summation
    # order rounding count as ties
    return 1e-10 * max(1.0, abs(observed))


def _finish(observed, values, exhaustive):
    ok = np.isfinite(values)
    n_bad = int((~ok).sum())
    if n_bad > 0.01 * values.size:
        raise DistributionDegenerateError(
            f"{n_bad} of {values.size} permutation statistics were undefined"
        )
    values = values[ok]
    tol = _tie_tol(observed)
    ge = int(np.sum(values >= observed - tol))
    le = int(np.sum(values <= observed + tol))
    r = values.size
    if exhaustive:
        p_upper, p_lower = ge / r, le / r
    else:
        p_upper, p_lower = (ge + 1) / (r + 1), (le + 1) / (r + 1)
    two = min(1.0, 2 * min(p_lower, p_upper))
    return PermutationResult(observed, values, ge, le, p_lower, p_upper, two,
                             exhaustive, r, n_bad)


def _spec(statistic, arity):
    spec = StatisticSpec(statistic) if isinstance(statistic, str) else statistic
    if spec.arity != arity:
        raise InvalidInputError(f"{spec.kind} is not a {arity}-sample comparison statistic")
    return spec


def _safe(spec, data):
    try:
        return evaluate(spec, data)
    except DegenerateError:
        return np.nan


def _two_sample_chunk(start, stop, pooled, n1, spec, seed):
    out = np.empty(stop - start)
    for k, i in enumerate(range(start, stop)):
        perm = seed.with_stream(i).generator().permutation(pooled.size)
        out[k] = _safe(spec, TwoSample(Sample(pooled[perm[:n1]]), Sample(pooled[perm[n1:]])))
    return out


def _pick_mode(mode, count, budget):
    if mode not in ("auto", "sampled", "exhaustive"):
        raise InvalidInputError("mode must be auto, sampled or exhaustive")
    if mode == "exhaustive" and count > budget:
        raise BudgetExceededError(
            f"exhaustive enumeration needs {count} arrangements (budget {budget})"
        )
    if mode == "auto":
        return count <= budget
    return mode == "exhaustive"


def two_sample_permutation(ts: TwoSample, statistic: Union[StatisticSpec, str] = "mean-difference",
                           r: int = DEFAULT_R, seed: Union[RandomSource, int] = 0,
                           mode: str = "auto", budget: int = EXHAUSTIVE_BUDGET,
                           workers: int = 1) -> PermutationResult:
    """Two-sample permutation test with the pooled data held fixed.

    ``mode='auto'`` enumerates all ``C(n, n1)`` relabellings when that
    count is within ``budget`` and samples ``r`` of them otherwise.
    """
    if not isinstance(ts, TwoSample):
        ts = TwoSample(*ts)
    spec = _spec(statistic, "two")
    pooled = ts.pooled()
    n1 = ts.group1.n
    observed = evaluate(spec, ts)
    count = math.comb(pooled.size, n1)
    if _pick_mode(mode, count, budget):
        values = np.empty(count)
        idx = np.arange(pooled.size)
        for k, first in enumerate(itertools.combinations(range(pooled.size), n1)):
            mask = np.zeros(pooled.size, bool)
            mask[list(first)] = True
            values[k] = _safe(spec, TwoSample(Sample(pooled[mask]), Sample(pooled[idx[~mask]])))
        return _finish(observed, values, True)
    if r < 1:
        raise InvalidInputError("r must be >= 1")
    seed = seed if isinstance(seed, RandomSource) else RandomSource(int(seed))
    values = _parallel.map_streams(_two_sample_chunk, r, (pooled, n1, spec, seed), workers)
    return _finish(observed, values, False)


def _independence_chunk(start, stop, x, y, spec, seed):
    out = np.empty(stop - start)
    for k, i in enumerate(range(start, stop)):
        perm = seed.with_stream(i).generator().permutation(y.size)
        out[k] = _safe(spec, PairedSample(x, y[perm]))
    return out


def independence_permutation(x, y, statistic: Union[StatisticSpec, str] = "correlation",
                             r: int = DEFAULT_R, seed: Union[RandomSource, int] = 0,
                             mode: str = "sampled", budget: int = EXHAUSTIVE_BUDGET,
                             workers: int = 1) -> PermutationResult:
    """Test of independence by permuting ``y`` against a fixed ``x``."""
    spec = _spec(statistic, "paired")
    if spec.kind not in ("correlation", "ols-slope"):
        raise InvalidInputError("independence tests use correlation or ols-slope")
    data = PairedSample(x, y)
    if data.n < 3:
        raise InvalidInputError("independence test needs n >= 3")
    observed = evaluate(spec, data)
    count = math.factorial(data.n)
    if _pick_mode(mode, count, budget):
        values = np.array([
            _safe(spec, PairedSample(data.x, data.y[list(p)]))
            for p in itertools.permutations(range(data.n))
        ])
        return _finish(observed, values, True)
    seed = seed if isinstance(seed, RandomSource) else RandomSource(int(seed))
    values = _parallel.map_streams(_independence_chunk, r, (data.x, data.y, spec, seed), workers)
    return _finish(observed, values, False)


def fisher_exact(table) -> tuple[float, float, float]:
    """Fisher's exact test on ``[[a, b], [c, d]]`` (rows are groups, columns success/failure).

    Returns ``(p_lower, p_upper, p_two_sided)`` for the count ``a``, computed
    in exact rational arithmetic. Two-sided is twice the smaller tail, capped at 1.
    """
    t = np.asarray(table)
    if t.shape != (2, 2):
        raise InvalidInputError("table must be 2x2")
    if np.any(t < 0) or np.any(t != np.floor(t)):
        raise InvalidInputError("table entries must be nonnegative integers")
    (a, b), (c, d) = (int(v) for v in t[0]), (int(v) for v in t[1])
    n1, n2, k = a + b, c + d, a + c
    n = n1 + n2
    if min(n1, n2, k, n - k) == 0:
        raise DegenerateTableError("table has a zero margin")
    total = math.comb(n, n1)
    lo_a, hi_a = max(0, k - n2), min(k, n1)
    weight = {j: math.comb(k, j) * math.comb(n - k, n1 - j) for j in range(lo_a, hi_a + 1)}
    p_lower = float(Fraction(sum(w for j, w in weight.items() if j <= a), total))
    p_upper = float(Fraction(sum(w for j, w in weight.items() if j >= a), total))
    return p_lower, p_upper, min(1.0, 2 * min(p_lower, p_upper))
