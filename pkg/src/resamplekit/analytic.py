"""Closed-form procedures and calculators.

Normal/t/gamma distribution functions, Student and skewness-adjusted t
intervals, first-order Edgeworth approximations, and the sample-size and
resample-count calculators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import special as sp

from .errors import InvalidInputError

__all__ = [
    "IntervalEstimate",
    "TailSpec",
    "special",
    "normal_cdf",
    "normal_pdf",
    "normal_quantile",
    "t_cdf",
    "t_quantile",
    "gamma_cdf",
    "student_t_interval",
    "JohnsonT1",
    "johnson_t1",
    "skew_adjusted_t_interval",
    "edgeworth_cdf",
    "required_n_for_t",
    "required_r",
    "NarrownessRow",
    "narrowness_table",
    "alpha_prime_half",
    "percentile_cf_endpoints",
]


@dataclass(frozen=True)
class IntervalEstimate:
    """A two-sided interval with optional Monte Carlo SEs of its endpoints."""

    lower: float
    upper: float
    method: str
    confidence: float
    endpoint_mc_se: Optional[tuple] = None

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise InvalidInputError("confidence must lie in (0, 1)")
        if self.lower > self.upper:
            raise InvalidInputError(
                f"{self.method}: lower endpoint {self.lower} exceeds upper {self.upper}"
            )

    @property
    def alpha(self) -> float:
        return 1.0 - self.confidence

    def as_dict(self) -> dict:
        d = {
            "method": self.method,
            "confidence": self.confidence,
            "lower": self.lower,
            "upper": self.upper,
        }
        if self.endpoint_mc_se is not None:
            d["lower_mc_se"], d["upper_mc_se"] = self.endpoint_mc_se
        return d


@dataclass(frozen=True)
class TailSpec:
    """One-sided tail probability; the matching two-sided confidence is ``1 - 2*alpha``."""

    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise InvalidInputError("one-sided alpha must lie in (0, 0.5)")

    @property
    def confidence(self) -> float:
        return 1.0 - 2.0 * self.alpha

    @classmethod
    def from_confidence(cls, confidence: float) -> "TailSpec":
        if not 0 < confidence < 1:
            raise InvalidInputError("confidence must lie in (0, 1)")
        return cls((1.0 - confidence) / 2.0)


def _check_df(df):
    if not df > 0:
        raise InvalidInputError(f"degrees of freedom must be positive, got {df}")


def _check_prob(p):
    if not 0 < p < 1:
        raise InvalidInputError(f"probability must lie in (0, 1), got {p}")


def normal_cdf(x):
    return sp.ndtr(x)


def normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2 * math.pi)


def normal_quantile(p):
    if np.any((np.asarray(p) <= 0) | (np.asarray(p) >= 1)):
        raise InvalidInputError("normal quantile needs p in (0, 1)")
    return sp.ndtri(p)


def t_cdf(x, df):
    _check_df(df)
    return sp.stdtr(df, x)


def t_quantile(p, df):
    _check_df(df)
    if np.any((np.asarray(p) <= 0) | (np.asarray(p) >= 1)):
        raise InvalidInputError("t quantile needs p in (0, 1)")
    return sp.stdtrit(df, p)


def gamma_cdf(x, shape, scale=1.0):
    if not (shape > 0 and scale > 0):
        raise InvalidInputError("gamma shape and scale must be positive")
    return sp.gammainc(shape, np.maximum(np.asarray(x, dtype=float), 0.0) / scale)


_SPECIAL = {
    "normal_cdf": normal_cdf,
    "normal_quantile": normal_quantile,
    "t_cdf": t_cdf,
    "t_quantile": t_quantile,
    "gamma_cdf": gamma_cdf,
}


def special(fn: str, x, *params):
    """Dispatch to a named distribution function, e.g. ``special('t_quantile', 0.975, 9)``."""
    try:
        f = _SPECIAL[fn]
    except KeyError:
        raise InvalidInputError(
            f"unknown function {fn!r}; valid: {', '.join(_SPECIAL)}"
        ) from None
    return f(x, *params)


def _tcrit(confidence: float, n: int) -> float:
    return float(t_quantile(1 - (1 - confidence) / 2, n - 1))


def _zcrit(confidence: float) -> float:
    return float(normal_quantile(1 - (1 - confidence) / 2))


def student_t_interval(mean: float, s: float, n: int, confidence: float = 0.95) -> IntervalEstimate:
    if n < 2:
        raise InvalidInputError("t interval needs n >= 2")
    if s < 0:
        raise InvalidInputError("s must be nonnegative")
    half = _tcrit(confidence, n) * s / math.sqrt(n)
    return IntervalEstimate(mean - half, mean + half, "t", confidence)


class JohnsonT1(NamedTuple):
    value: float
    flattened: float
    non_monotone: bool


def johnson_t1(t: float, kappa: float) -> JohnsonT1:
    """Skewness-corrected statistic ``t + kappa * (2 t^2 + 1)``.

    The map is a parabola with its extremum at ``t = -1 / (4 kappa)``.
    Beyond that point it turns back; ``flattened`` holds the extremum's
    value there instead.
    """
    value = t + kappa * (2 * t * t + 1)
    if kappa == 0:
        return JohnsonT1(value, value, False)
    turn = -1.0 / (4.0 * kappa)
    beyond = t < turn if kappa > 0 else t > turn
    if beyond:
        return JohnsonT1(value, turn + kappa * (2 * turn * turn + 1), True)
    return JohnsonT1(value, value, False)


def skew_adjusted_t_interval(mean: float, s: float, n: int, skewness: float,
                             confidence: float = 0.95) -> IntervalEstimate:
    """``mean + s/sqrt(n) * (kappa (1 + 2 t^2) +/- t)``, ``kappa = skewness / (6 sqrt(n))``."""
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    t = _tcrit(confidence, n)
    kappa = skewness / (6 * math.sqrt(n))
    half = t * s / math.sqrt(n)
    center = mean + s / math.sqrt(n) * kappa * (1 + 2 * t * t)
    return IntervalEstimate(center - half, center + half, "tSkew", confidence)


def percentile_cf_endpoints(mean: float, s: float, n: int, skewness: float,
                            confidence: float = 0.95) -> IntervalEstimate:
    """Where percentile endpoints land asymptotically: ``mean + s/sqrt(n) (kappa (z^2-1) +/- z)``."""
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    z = _zcrit(confidence)
    kappa = skewness / (6 * math.sqrt(n))
    se = s / math.sqrt(n)
    center = mean + se * kappa * (z * z - 1)
    return IntervalEstimate(center - se * z, center + se * z, "percentile-cf", confidence)


def edgeworth_cdf(kind: str, x, gamma: float, n: int):
    """First-order Edgeworth approximation to the CDF of a standardized mean or t.

    ``kind='mean'``: ``Phi(x) - kappa (x^2 - 1) phi(x)``;
    ``kind='t'``: ``Phi(x) + kappa (2 x^2 + 1) phi(x)``; clipped to [0, 1].
    """
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    x = np.asarray(x, dtype=float)
    kappa = gamma / (6 * math.sqrt(n))
    if kind == "mean":
        p = normal_cdf(x) - kappa * (x * x - 1) * normal_pdf(x)
    elif kind == "t":
        p = normal_cdf(x) + kappa * (2 * x * x + 1) * normal_pdf(x)
    else:
        raise InvalidInputError("kind must be 'mean' or 't'")
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def required_n_for_t(gamma: float, alpha: float, rel_err: float = 0.1) -> int:
    """Sample size for the first-order t error to fall within ``rel_err * alpha``.

    ``alpha`` is the one-sided level. The result ``m`` is a strict
    threshold: the requirement is ``n > m`` (``m`` is the integer part of
    the bound).
    """
    if gamma < 0:
        raise InvalidInputError("skewness must be nonnegative")
    if not 0 < alpha < 0.5:
        raise InvalidInputError("alpha must lie in (0, 0.5)")
    if rel_err <= 0:
        raise InvalidInputError("rel_err must be positive")
    z = float(normal_quantile(1 - alpha))
    bound = (gamma / 6 / (rel_err * alpha) * (2 * z * z + 1) * normal_pdf(z)) ** 2
    return int(math.floor(bound))


def required_r(kind: str, p: float = 0.025, rel_err: float = 0.1,
               confidence: float = 0.95, alpha: float = 0.05) -> int:
    """Resamples needed for Monte Carlo error to stay within ``rel_err``.

    Parameters
    ----------
    kind : {'quantile', 'se'}
        ``quantile``: estimated tail probability ``p`` within ``rel_err * p``
        with probability ``confidence``. ``se``: ``s_B`` precise enough that a
        t interval with bootstrap SE keeps its one-sided level ``alpha/2``
        within ``rel_err``; assumes a normal bootstrap distribution so that
        ``s_B / sigma_B`` has variance ``1 / (2r)``.
    """
    _check_prob(confidence)
    if rel_err <= 0:
        raise InvalidInputError("rel_err must be positive")
    zc = _zcrit(confidence)
    if kind == "quantile":
        _check_prob(p)
        return math.ceil((zc * math.sqrt(p * (1 - p)) / (rel_err * p)) ** 2)
    if kind == "se":
        _check_prob(alpha)
        tail = alpha / 2
        z = float(normal_quantile(1 - tail))
        needed = []
        for t in (tail * (1 + rel_err), tail * (1 - rel_err)):
            ratio = float(normal_quantile(1 - t)) / z
            needed.append((zc / abs(ratio - 1)) ** 2 / 2)
        # the wider tail gives the binding (larger) requirement
        return math.ceil(max(needed))
    raise InvalidInputError("kind must be 'quantile' or 'se'")


def alpha_prime_half(n: int, alpha: float = 0.05) -> float:
    """Adjusted one-sided tail ``Phi(-sqrt(n/(n-1)) t_{alpha/2, n-1})``."""
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    t = float(t_quantile(1 - alpha / 2, n - 1))
    return float(normal_cdf(-math.sqrt(n / (n - 1)) * t))


class NarrownessRow(NamedTuple):
    shrink: float
    z_over_t: float
    one_sided_size: float
    alpha_prime_half: float


def narrowness_table(n, alpha: float = 0.05) -> NarrownessRow:
    """Small-sample effects for an interval ``xbar +/- z sigma_hat / sqrt(n)``.

    ``one_sided_size`` is the per-side non-coverage of that interval under
    normality. ``n=math.inf`` gives the limits.
    """
    z = float(normal_quantile(1 - alpha / 2))
    if n == math.inf:
        return NarrownessRow(1.0, 1.0, alpha / 2, alpha / 2)
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    shrink = math.sqrt((n - 1) / n)
    t = float(t_quantile(1 - alpha / 2, n - 1))
    size = float(1 - t_cdf(z * shrink, n - 1))
    return NarrownessRow(shrink, z / t, size, alpha_prime_half(n, alpha))
