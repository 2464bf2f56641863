"""Statistics that get resampled.

Data containers (:class:`Sample`, :class:`TwoSample`, :class:`PairedSample`),
the :class:`StatisticSpec` naming a statistic, and :func:`evaluate`, which
computes it. A few statistics with their own contracts (skewness,
correlation, two-sample t) are exposed directly as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import DegenerateSampleError, InvalidInputError, RatioUndefinedError

__all__ = [
    "Sample",
    "TwoSample",
    "PairedSample",
    "StatisticSpec",
    "ONE_SAMPLE_KINDS",
    "TWO_SAMPLE_KINDS",
    "PAIRED_KINDS",
    "STATISTIC_KINDS",
    "as_sample",
    "evaluate",
    "skewness_estimate",
    "correlation",
    "ols_slope",
    "two_sample_t",
]


def _as_array(values, name="values"):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        arr = arr.ravel()
    if arr.size == 0:
        raise InvalidInputError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class Sample:
    """Ordered real observations with optional nonnegative weights."""

    values: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        values = _as_array(self.values)
        object.__setattr__(self, "values", values)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != values.shape:
                raise InvalidInputError("weights must match values in length")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise InvalidInputError("weights must be finite and nonnegative")
            if not np.any(w > 0):
                raise InvalidInputError("weights must not all be zero")
            object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.values.size

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class TwoSample:
    """Two independent groups; group sizes are held fixed when resampling."""

    group1: Sample
    group2: Sample

    def __post_init__(self):
        object.__setattr__(self, "group1", as_sample(self.group1))
        object.__setattr__(self, "group2", as_sample(self.group2))

    @property
    def sizes(self):
        return (self.group1.n, self.group2.n)

    def pooled(self) -> np.ndarray:
        return np.concatenate([self.group1.values, self.group2.values])


@dataclass(frozen=True)
class PairedSample:
    """Matched (x, y) observations; resampled by rows."""

    x: np.ndarray
    y: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        x = _as_array(self.x, "x")
        y = _as_array(self.y, "y")
        if x.size != y.size:
            raise InvalidInputError(f"x and y lengths differ ({x.size} vs {y.size})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.weights is not None:
            object.__setattr__(self, "weights", Sample(x, self.weights).weights)

    @property
    def n(self) -> int:
        return self.x.size

    def __len__(self):
        return self.x.size


def as_sample(data) -> Sample:
    if isinstance(data, Sample):
        return data
    return Sample(np.asarray(data, dtype=float))


ONE_SAMPLE_KINDS = (
    "mean",
    "trimmed-mean",
    "median",
    "variance-unbiased",
    "variance-plugin",
    "sd",
    "skewness",
    "max",
)
TWO_SAMPLE_KINDS = (
    "mean-difference",
    "t-pooled",
    "t-welch",
    "t-puc",
    "relative-risk",
    "log-relative-risk",
)
PAIRED_KINDS = ("correlation", "ols-slope", "r-squared")
STATISTIC_KINDS = ONE_SAMPLE_KINDS + TWO_SAMPLE_KINDS + PAIRED_KINDS

# Depends on the data only through the empirical distribution.
_FUNCTIONAL = {
    "mean": True,
    # floor(trim * n) changes when every point is doubled
    "trimmed-mean": False,
    "median": True,
    "variance-unbiased": False,
    "variance-plugin": True,
    "sd": False,
    "skewness": False,
    "max": True,
    "mean-difference": True,
    "t-pooled": False,
    "t-welch": False,
    "t-puc": False,
    "relative-risk": True,
    "log-relative-risk": True,
    "correlation": True,
    "ols-slope": True,
    "r-squared": True,
}

_WEIGHTED = {
    "mean",
    "variance-plugin",
    "max",
    "mean-difference",
    "relative-risk",
    "log-relative-risk",
    "correlation",
    "ols-slope",
    "r-squared",
}


@dataclass(frozen=True)
class StatisticSpec:
    """Names a statistic. ``trim`` is only used by ``trimmed-mean``.

    The 0.25 trim default is a CLI convenience, not a recommendation.
    """

    kind: str
    trim: float = 0.25
    functional: bool = field(init=False)

    def __post_init__(self):
        if self.kind not in STATISTIC_KINDS:
            raise InvalidInputError(
                f"unknown statistic {self.kind!r}; valid: {', '.join(STATISTIC_KINDS)}"
            )
        if not 0 <= self.trim < 0.5:
            raise InvalidInputError("trim fraction must lie in [0, 0.5)")
        object.__setattr__(self, "functional", _FUNCTIONAL[self.kind])

    @property
    def arity(self) -> str:
        if self.kind in ONE_SAMPLE_KINDS:
            return "one"
        if self.kind in TWO_SAMPLE_KINDS:
            return "two"
        return "paired"

    @property
    def supports_weights(self) -> bool:
        return self.kind in _WEIGHTED


def _normalized(w):
    return w / w.sum()


def _wmean(x, w):
    if w is None:
        return float(np.mean(x))
    return float(np.dot(_normalized(w), x))


def _wvar_plugin(x, w):
    m = _wmean(x, w)
    if w is None:
        return float(np.mean((x - m) ** 2))
    return float(np.dot(_normalized(w), (x - m) ** 2))


def _sd(x):
    if x.size < 2:
        raise InvalidInputError("standard deviation needs n >= 2")
    return float(np.std(x, ddof=1))


def _one_sample(spec: StatisticSpec, s: Sample) -> float:
    x, w = s.values, s.weights
    kind = spec.kind
    if kind == "mean":
        return _wmean(x, w)
    if kind == "variance-plugin":
        return _wvar_plugin(x, w)
    if kind == "max":
        return float(x.max() if w is None else x[w > 0].max())
    if kind == "variance-unbiased":
        if x.size < 2:
            raise InvalidInputError("variance needs n >= 2")
        return float(np.var(x, ddof=1))
    if kind == "sd":
        return _sd(x)
    if kind == "median":
        return float(np.median(x))
    if kind == "trimmed-mean":
        k = int(math.floor(spec.trim * x.size))
        if x.size - 2 * k < 1:
            raise InvalidInputError("trim leaves no observations")
        xs = np.sort(x)
        return float(np.mean(xs[k : x.size - k]))
    if kind == "skewness":
        return skewness_estimate(x)
    raise AssertionError(kind)


def _two_sample(spec: StatisticSpec, ts: TwoSample) -> float:
    g1, g2 = ts.group1, ts.group2
    kind = spec.kind
    if kind == "mean-difference":
        return _wmean(g1.values, g1.weights) - _wmean(g2.values, g2.weights)
    if kind in ("relative-risk", "log-relative-risk"):
        num = _wmean(g1.values, g1.weights)
        den = _wmean(g2.values, g2.weights)
        if den == 0:
            raise RatioUndefinedError("relative risk: denominator rate is zero")
        if kind == "relative-risk":
            return num / den
        if num <= 0:
            raise RatioUndefinedError("log relative risk: numerator rate is zero")
        return math.log(num / den)
    variant = kind[2:]
    return two_sample_t(ts, variant)[0]


def _paired(spec: StatisticSpec, ps: PairedSample) -> float:
    if spec.kind == "correlation":
        return correlation(ps.x, ps.y, ps.weights)
    if spec.kind == "ols-slope":
        return ols_slope(ps.x, ps.y, ps.weights)
    return correlation(ps.x, ps.y, ps.weights) ** 2


def evaluate(spec: StatisticSpec, data) -> float:
    """Compute ``spec`` on ``data``.

    Parameters
    ----------
    spec : StatisticSpec
    data : Sample, TwoSample, PairedSample or array_like
        Must match the statistic's arity. Plain arrays are treated as a
        one-sample :class:`Sample`.

    Returns
    -------
    float

    Raises
    ------
    InvalidInputError
        Arity mismatch, or weights given for a statistic without a weighted form.
    RatioUndefinedError
        Relative risk with a zero denominator rate.
    """
    arity = spec.arity
    if arity == "one":
        if isinstance(data, (TwoSample, PairedSample)):
            raise InvalidInputError(f"{spec.kind} expects one sample")
        data = as_sample(data)
        weighted = data.weights is not None
    elif arity == "two":
        if not isinstance(data, TwoSample):
            raise InvalidInputError(f"{spec.kind} expects two samples")
        weighted = data.group1.weights is not None or data.group2.weights is not None
    else:
        if not isinstance(data, PairedSample):
            raise InvalidInputError(f"{spec.kind} expects paired (x, y) data")
        weighted = data.weights is not None
    if weighted and not spec.supports_weights:
        raise InvalidInputError(f"{spec.kind} has no weighted form")
    if arity == "one":
        return _one_sample(spec, data)
    if arity == "two":
        return _two_sample(spec, data)
    return _paired(spec, data)


def skewness_estimate(x) -> float:
    """Skewness as ``(1/n) * sum((x - xbar)**3) / s**3``.

    Mixing the 1/n third moment with the n-1 standard deviation shrinks
    the estimate toward zero in small samples.
    """
    x = _as_array(x)
    n = x.size
    if n < 2:
        raise InvalidInputError("skewness needs n >= 2")
    s = float(np.std(x, ddof=1))
    if s == 0:
        raise DegenerateSampleError("skewness undefined for zero standard deviation")
    d = x - x.mean()
    return float(np.mean(d**3) / s**3)


def _centered(x, y, w):
    if x.size < 2:
        raise InvalidInputError("need at least 2 pairs")
    if w is None:
        return x - x.mean(), y - y.mean(), None
    p = _normalized(w)
    return x - p @ x, y - p @ y, p


def correlation(x, y, weights=None) -> float:
    """Pearson correlation of ``x`` and ``y``."""
    x = _as_array(x, "x")
    y = _as_array(y, "y")
    if x.size != y.size:
        raise InvalidInputError("x and y lengths differ")
    dx, dy, p = _centered(x, y, weights)
    if p is None:
        sxx, syy, sxy = dx @ dx, dy @ dy, dx @ dy
    else:
        sxx, syy, sxy = p @ (dx * dx), p @ (dy * dy), p @ (dx * dy)
    if sxx <= 0 or syy <= 0:
        raise DegenerateSampleError("correlation undefined for zero variance")
    r = sxy / math.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


def ols_slope(x, y, weights=None) -> float:
    """Least-squares slope of ``y`` on ``x``."""
    x = _as_array(x, "x")
    y = _as_array(y, "y")
    dx, dy, p = _centered(x, y, weights)
    if p is None:
        sxx, sxy = dx @ dx, dx @ dy
    else:
        sxx, sxy = p @ (dx * dx), p @ (dx * dy)
    if sxx <= 0:
        raise DegenerateSampleError("slope undefined: x has zero variance")
    return float(sxy / sxx)


def two_sample_t(ts: TwoSample, variant: str = "welch") -> tuple[float, float]:
    """Two-sample t statistic for ``mean(group1) - mean(group2)``.

    Parameters
    ----------
    ts : TwoSample
    variant : {'pooled', 'welch', 'puc'}
        ``puc`` standardizes by group 1's SD alone, with ``n1 - 1`` df.

    Returns
    -------
    (t, df)
    """
    if not isinstance(ts, TwoSample):
        ts = TwoSample(*ts)
    x1, x2 = ts.group1.values, ts.group2.values
    n1, n2 = x1.size, x2.size
    if n1 < 2 or n2 < 2:
        raise InvalidInputError("each group needs n >= 2")
    diff = float(x1.mean() - x2.mean())
    v1, v2 = np.var(x1, ddof=1), np.var(x2, ddof=1)
    if variant == "pooled":
        df = n1 + n2 - 2
        sp2 = ((n1 - 1) * v1 + (n2 - 1) * v2) / df
        se = math.sqrt(sp2 * (1 / n1 + 1 / n2))
    elif variant == "welch":
        a, b = v1 / n1, v2 / n2
        se = math.sqrt(a + b)
        df = (a + b) ** 2 / (a**2 / (n1 - 1) + b**2 / (n2 - 1)) if se > 0 else math.nan
    elif variant == "puc":
        se = math.sqrt(v1) * math.sqrt(1 / n1 + 1 / n2)
        df = n1 - 1
    else:
        raise InvalidInputError(f"unknown t variant {variant!r}; valid: pooled, welch, puc")
    if se == 0:
        raise DegenerateSampleError("t statistic undefined for zero standard error")
    return diff / se, float(df)


DataLike = Union[Sample, TwoSample, PairedSample]
