"""Bootstrap distributions, their summaries, and bootstrap intervals.

Quantiles everywhere use the interpolated order-statistic rule with
plotting positions ``k / (r + 1)`` (:func:`quantile_interp`).
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Union

import numpy as np
from scipy import optimize

from . import _parallel
from .analytic import IntervalEstimate, alpha_prime_half, normal_quantile, t_quantile
from .errors import (
    DegenerateError,
    DistributionDegenerateError,
    InfeasibleTiltError,
    InsufficientReplicatesError,
    InvalidInputError,
)
from .estimators import (
    PairedSample,
    Sample,
    StatisticSpec,
    TwoSample,
    as_sample,
    evaluate,
)
from .sampling import RandomSource, SamplerSpec, resample

__all__ = [
    "BootstrapDistribution",
    "BootstrapSummary",
    "IntervalEstimate",
    "run_bootstrap",
    "exhaustive_bootstrap",
    "summarize",
    "quantile_interp",
    "interp_cdf",
    "percentile_interval",
    "expanded_percentile_interval",
    "reverse_percentile_interval",
    "t_with_bootstrap_se",
    "bootstrap_t_distribution",
    "bootstrap_t_interval",
    "bootstrap_t_pvalue",
    "mc_error",
    "mc_error_proportion",
    "mc_error_mean",
    "mc_error_se",
    "mc_error_quantile",
    "Tilt",
    "tilting_weights",
    "histogram_table",
    "MAX_UNDEFINED_FRACTION",
]

MAX_UNDEFINED_FRACTION = 0.01
DEFAULT_R = 10_000
DEFAULT_R2 = 50


@dataclass(frozen=True)
class BootstrapDistribution:
    """Replicate statistics plus what produced them.

    ``replicates`` holds only defined values; ``n_excluded`` counts
    replicates dropped because the statistic was undefined on them.
    """

    replicates: np.ndarray
    observed: float
    statistic: Union[StatisticSpec, str, None] = None
    sampler: Optional[SamplerSpec] = None
    seed: Optional[RandomSource] = None
    sample_sizes: tuple = ()
    n_excluded: int = 0

    def __post_init__(self):
        reps = np.asarray(self.replicates, dtype=float)
        if reps.size < 1:
            raise InsufficientReplicatesError("bootstrap distribution needs r >= 1")
        if not np.all(np.isfinite(reps)):
            raise InvalidInputError("replicates must be finite")
        reps.setflags(write=False)
        object.__setattr__(self, "replicates", reps)

    @property
    def r(self) -> int:
        return self.replicates.size

    def transform(self, fn: Callable) -> "BootstrapDistribution":
        """Apply ``fn`` to every replicate and to the observed value."""
        return BootstrapDistribution(
            fn(self.replicates), float(fn(self.observed)), self.statistic,
            self.sampler, self.seed, self.sample_sizes, self.n_excluded,
        )

    def to_text(self) -> str:
        """Header comments, then one replicate per line (exact float repr)."""
        stat = self.statistic.kind if isinstance(self.statistic, StatisticSpec) else self.statistic
        lines = [
            "# resamplekit bootstrap distribution v1",
            f"# statistic: {stat or ''}",
            f"# observed: {self.observed!r}",
            f"# sampler: {self.sampler.variant if self.sampler else ''}",
            f"# seed: {self.seed.seed if self.seed else ''}",
            f"# sample_sizes: {' '.join(str(k) for k in self.sample_sizes)}",
            f"# excluded: {self.n_excluded}",
        ]
        lines.extend(repr(float(v)) for v in self.replicates)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BootstrapDistribution":
        meta, values = {}, []
        for line in io.StringIO(text):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
            else:
                values.append(float(line))
        if "observed" not in meta:
            raise InvalidInputError("missing '# observed:' header")
        stat = meta.get("statistic") or None
        sampler = meta.get("sampler")
        seed = meta.get("seed")
        return cls(
            np.array(values),
            float(meta["observed"]),
            StatisticSpec(stat) if stat else None,
            SamplerSpec(sampler) if sampler else None,
            RandomSource(int(seed)) if seed else None,
            tuple(int(k) for k in meta.get("sample_sizes", "").split()),
            int(meta.get("excluded", 0) or 0),
        )


class BootstrapSummary(NamedTuple):
    observed: float
    se: float
    mean: float
    bias: float

    @property
    def bias_adjusted(self) -> float:
        """``2 * observed - mean``; a diagnostic, not a recommended estimate."""
        return 2 * self.observed - self.mean


def _stat_fn(statistic):
    if isinstance(statistic, str):
        statistic = StatisticSpec(statistic)
    if isinstance(statistic, StatisticSpec):
        return statistic, lambda d: evaluate(statistic, d)
    if callable(statistic):
        return statistic, statistic
    raise InvalidInputError("statistic must be a StatisticSpec, a kind name, or a callable")


def _coerce_data(data):
    if isinstance(data, (TwoSample, PairedSample, Sample)):
        return data
    return as_sample(data)


def _sizes(data) -> tuple:
    if isinstance(data, TwoSample):
        return data.sizes
    return (data.n,)


def _replicate_chunk(start, stop, data, statistic, sampler, seed):
    _, fn = _stat_fn(statistic)
    out = np.empty(stop - start)
    for k, i in enumerate(range(start, stop)):
        res = resample(data, sampler, seed.with_stream(i))
        if res is None:
            out[k] = np.nan
            continue
        try:
            v = fn(res)
        except DegenerateError:
            v = np.nan
        out[k] = v if np.isfinite(v) else np.nan
    return out


def _drop_undefined(values, what="replicates"):
    bad = ~np.isfinite(values)
    n_bad = int(bad.sum())
    if n_bad > MAX_UNDEFINED_FRACTION * values.size:
        raise DistributionDegenerateError(
            f"{n_bad} of {values.size} {what} were undefined (limit "
            f"{MAX_UNDEFINED_FRACTION:.0%})"
        )
    return values[~bad], n_bad


def run_bootstrap(data, statistic, r: int = DEFAULT_R, sampler: Optional[SamplerSpec] = None,
                  seed: Union[RandomSource, int] = 0, workers: int = 1) -> BootstrapDistribution:
    """Build a bootstrap distribution.

    Parameters
    ----------
    data : array_like, Sample, TwoSample or PairedSample
        Two-sample data are resampled independently within each group.
    statistic : StatisticSpec, str or callable
        A callable receives the resampled data object and returns a float.
    r : int
        Number of resamples; resample ``i`` is drawn from stream ``i``.
    sampler : SamplerSpec, optional
        Defaults to ordinary sampling with replacement.
    seed : RandomSource or int
    workers : int
        Processes to use; the result is identical for any value.

    Raises
    ------
    DistributionDegenerateError
        More than 1% of replicates undefined (e.g. zero-denominator ratios).
    """
    if r < 1:
        raise InvalidInputError("r must be >= 1")
    data = _coerce_data(data)
    seed = seed if isinstance(seed, RandomSource) else RandomSource(int(seed))
    sampler = sampler or SamplerSpec()
    spec, fn = _stat_fn(statistic)
    observed = float(fn(data))
    values = _parallel.map_streams(
        _replicate_chunk, r, (data, statistic, sampler, seed), workers
    )
    values, n_bad = _drop_undefined(values)
    return BootstrapDistribution(values, observed, spec, sampler, seed, _sizes(data), n_bad)


def exhaustive_bootstrap(data, statistic) -> BootstrapDistribution:
    """All ``n**n`` ordered resamples of a small one-sample dataset."""
    x = as_sample(data).values
    n = x.size
    if n > 7:
        raise InvalidInputError(f"exhaustive bootstrap is limited to n <= 7 (n = {n})")
    spec, fn = _stat_fn(statistic)
    idx = np.array(list(itertools.product(range(n), repeat=n)))
    if isinstance(spec, StatisticSpec) and spec.kind == "mean":
        values = x[idx].mean(axis=1)
    else:
        values = np.array([fn(Sample(x[row])) for row in idx])
    return BootstrapDistribution(values, float(fn(Sample(x))), spec, None, None, (n,))


def summarize(bd: BootstrapDistribution) -> BootstrapSummary:
    """Observed value, bootstrap SE (``r - 1`` divisor), mean, and bias."""
    if bd.r < 2:
        raise InsufficientReplicatesError("standard error needs r >= 2")
    v = bd.replicates
    if v.min() == v.max():
        # avoid summation drift on identical replicates
        return BootstrapSummary(bd.observed, 0.0, float(v[0]), float(v[0]) - bd.observed)
    mean = float(np.mean(v))
    se = float(np.std(v, ddof=1))
    return BootstrapSummary(bd.observed, se, mean, mean - bd.observed)


def quantile_interp(values, p):
    """Quantile with plotting positions ``k / (r + 1)``.

    With sorted values ``x_(1) <= ... <= x_(r)`` and ``h = p (r + 1)``,
    returns ``x_(floor h) + (h - floor h)(x_(floor h + 1) - x_(floor h))``,
    clamped to the sample range when ``h`` falls outside ``[1, r]``.
    ``p`` may be a scalar or an array.
    """
    x = np.sort(np.asarray(values, dtype=float))
    r = x.size
    if r == 0:
        raise InvalidInputError("quantile of empty input")
    p_arr = np.asarray(p, dtype=float)
    if np.any((p_arr <= 0) | (p_arr >= 1)):
        raise InvalidInputError("quantile probability must lie in (0, 1)")
    lo, hi, frac = _positions(p_arr, r)
    q = x[lo - 1] + frac * (x[hi - 1] - x[lo - 1])
    return float(q) if q.ndim == 0 else q


def _positions(p, r):
    h = np.clip(p * (r + 1), 1.0, float(r))
    # snap rounding noise from tail arithmetic such as (1 - 0.95) / 2
    near = np.round(h)
    h = np.where(np.abs(h - near) <= 16 * np.finfo(float).eps * h, near, h)
    lo = np.floor(h).astype(int)
    return lo, np.minimum(lo + 1, r), h - lo


def _sorted_quantiles(x_sorted, p):
    # quantile_interp on presorted rows (last axis)
    lo, hi, frac = _positions(np.asarray(p, dtype=float), x_sorted.shape[-1])
    return x_sorted[..., lo - 1] + frac * (x_sorted[..., hi - 1] - x_sorted[..., lo - 1])


def interp_cdf(values, t: float) -> float:
    """Inverse of :func:`quantile_interp`: position of ``t`` as ``h / (r + 1)``.

    Values tied with ``t`` take the midpoint of their positions; ``h`` is
    clamped to ``[1, r]``.
    """
    x = np.sort(np.asarray(values, dtype=float))
    r = x.size
    below = int(np.searchsorted(x, t, "left"))
    upto = int(np.searchsorted(x, t, "right"))
    if upto > below:
        h = (below + 1 + upto) / 2
    elif below == 0:
        h = 1.0
    elif below == r:
        h = float(r)
    else:
        a, b = x[below - 1], x[below]
        h = below + (t - a) / (b - a)
    return min(max(h, 1.0), float(r)) / (r + 1)


def _interval(lower, upper, method, confidence, se=None):
    return IntervalEstimate(float(lower), float(upper), method, confidence,
                            None if se is None else (float(se[0]), float(se[1])))


def _check_conf(confidence):
    if not 0 < confidence < 1:
        raise InvalidInputError("confidence must lie in (0, 1)")


def _need_r2(bd):
    if bd.r < 2:
        raise InsufficientReplicatesError("interval needs r >= 2")


def _endpoint_se(bd, probs, mc_se, seed):
    if not mc_se:
        return None
    return tuple(mc_error_quantile(bd.replicates, p, seed=seed) for p in probs)


def percentile_interval(bd: BootstrapDistribution, confidence: float = 0.95,
                        mc_se: bool = False, mc_seed: int = 0) -> IntervalEstimate:
    """Middle ``confidence`` span of the bootstrap distribution."""
    _check_conf(confidence)
    _need_r2(bd)
    a = (1 - confidence) / 2
    lo, hi = quantile_interp(bd.replicates, [a, 1 - a])
    return _interval(lo, hi, "percentile", confidence,
                     _endpoint_se(bd, (a, 1 - a), mc_se, mc_seed))


def _effective_n(bd, n):
    if n is not None:
        return n
    if not bd.sample_sizes:
        raise InvalidInputError("sample size unknown; pass n explicitly")
    return min(bd.sample_sizes)


def expanded_percentile_interval(bd: BootstrapDistribution, confidence: float = 0.95,
                                 n: Optional[int] = None, mc_se: bool = False,
                                 mc_seed: int = 0) -> IntervalEstimate:
    """Percentile interval at the widened tail ``alpha'/2``.

    ``n`` defaults to the (smallest) group size recorded on ``bd``.
    """
    _check_conf(confidence)
    _need_r2(bd)
    n = _effective_n(bd, n)
    a = alpha_prime_half(n, 1 - confidence)
    lo, hi = quantile_interp(bd.replicates, [a, 1 - a])
    return _interval(lo, hi, "expanded", confidence,
                     _endpoint_se(bd, (a, 1 - a), mc_se, mc_seed))


def reverse_percentile_interval(bd: BootstrapDistribution, confidence: float = 0.95,
                                mc_se: bool = False, mc_seed: int = 0) -> IntervalEstimate:
    """Percentile interval reflected about the observed statistic."""
    _check_conf(confidence)
    _need_r2(bd)
    a = (1 - confidence) / 2
    lo, hi = quantile_interp(bd.replicates, [a, 1 - a])
    se = _endpoint_se(bd, (1 - a, a), mc_se, mc_seed)
    return _interval(2 * bd.observed - hi, 2 * bd.observed - lo, "reverse", confidence, se)


def t_with_bootstrap_se(bd: BootstrapDistribution, confidence: float = 0.95,
                        n: Optional[int] = None, critical: Optional[float] = None) -> IntervalEstimate:
    """``observed +/- t_{alpha/2, n-1} * s_B``.

    ``critical`` overrides the multiplier (e.g. 1.96 for a z interval).
    The endpoint SEs use ``s_B / sqrt(2 r)`` for the SE of ``s_B``.
    """
    _check_conf(confidence)
    s = summarize(bd)
    if critical is None:
        n = _effective_n(bd, n)
        if n < 2:
            raise InvalidInputError("n must be >= 2")
        critical = float(t_quantile(1 - (1 - confidence) / 2, n - 1))
    half = critical * s.se
    se_end = critical * s.se / math.sqrt(2 * bd.r)
    return _interval(bd.observed - half, bd.observed + half, "tBoot", confidence,
                     (se_end, se_end))


def _formula_se(data) -> float:
    if isinstance(data, TwoSample):
        x1, x2 = data.group1.values, data.group2.values
        if x1.size < 2 or x2.size < 2:
            raise InvalidInputError("formula SE needs n >= 2 per group")
        return math.sqrt(np.var(x1, ddof=1) / x1.size + np.var(x2, ddof=1) / x2.size)
    x = as_sample(data).values
    if x.size < 2:
        raise InvalidInputError("formula SE needs n >= 2")
    return float(np.std(x, ddof=1) / math.sqrt(x.size))


_FORMULA_KINDS = {"mean": Sample, "mean-difference": TwoSample}


def _check_formula(spec, data):
    kind = spec.kind if isinstance(spec, StatisticSpec) else None
    want = _FORMULA_KINDS.get(kind)
    if want is None or not isinstance(data, want):
        raise InvalidInputError(
            "formula standard errors exist only for mean (one sample) and "
            "mean-difference (two samples); use se_provider='iterated'"
        )


def _tstar_chunk(start, stop, data, statistic, sampler, seed, se_provider, r2):
    _, fn = _stat_fn(statistic)
    theta = np.empty(stop - start)
    se = np.empty(stop - start)
    for k, i in enumerate(range(start, stop)):
        rs = seed.with_stream(i)
        res = resample(data, sampler, rs)
        try:
            theta[k] = fn(res)
            if se_provider == "formula":
                se[k] = _formula_se(res)
            else:
                inner = _replicate_chunk(0, r2, res, statistic, SamplerSpec(), rs.child())
                inner = inner[np.isfinite(inner)]
                se[k] = np.std(inner, ddof=1) if inner.size > 1 else np.nan
        except DegenerateError:
            theta[k] = se[k] = np.nan
    return theta, se


class BootstrapT(NamedTuple):
    observed: float
    se: float
    tstar: np.ndarray
    n_excluded: int


def bootstrap_t_distribution(data, statistic, se_provider: str = "formula",
                             r: int = DEFAULT_R, seed: Union[RandomSource, int] = 0,
                             r2: int = DEFAULT_R2, workers: int = 1) -> BootstrapT:
    """Replicates of ``t* = (theta* - theta_hat) / S*``.

    ``se_provider='formula'`` uses ``s / sqrt(n)`` (mean) or the Welch SE
    (mean difference); ``'iterated'`` estimates each ``S*`` from ``r2``
    second-level resamples, and ``S`` for the data by the SD of the
    first-level replicates.
    """
    if se_provider not in ("formula", "iterated"):
        raise InvalidInputError("se_provider must be 'formula' or 'iterated'")
    if se_provider == "iterated" and r2 < 25:
        raise InvalidInputError("iterated standard errors need r2 >= 25")
    if r < 2:
        raise InvalidInputError("r must be >= 2")
    data = _coerce_data(data)
    seed = seed if isinstance(seed, RandomSource) else RandomSource(int(seed))
    spec, fn = _stat_fn(statistic)
    if se_provider == "formula":
        _check_formula(spec, data)
    observed = float(fn(data))
    theta, se = _parallel.map_streams(
        _tstar_chunk, r, (data, statistic, SamplerSpec(), seed, se_provider, r2), workers
    )
    ok = np.isfinite(theta)
    if se_provider == "formula":
        S = _formula_se(data)
    else:
        S = float(np.std(theta[ok], ddof=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        tstar = np.where(se > 0, (theta - observed) / se, np.nan)
    tstar, n_bad = _drop_undefined(tstar, "bootstrap-t replicates")
    return BootstrapT(observed, S, tstar, n_bad)


def bootstrap_t_interval(data, statistic, se_provider: str = "formula", r: int = DEFAULT_R,
                         confidence: float = 0.95, seed: Union[RandomSource, int] = 0,
                         r2: int = DEFAULT_R2, workers: int = 1) -> IntervalEstimate:
    """``(theta - q_{1-a/2} S, theta - q_{a/2} S)`` from the t* quantiles.

    The upper t* quantile sets the lower endpoint.
    """
    _check_conf(confidence)
    bt = bootstrap_t_distribution(data, statistic, se_provider, r, seed, r2, workers)
    return _bootstrap_t_from(bt, confidence)


def _bootstrap_t_from(bt: BootstrapT, confidence):
    a = (1 - confidence) / 2
    qlo, qhi = quantile_interp(bt.tstar, [a, 1 - a])
    return _interval(bt.observed - qhi * bt.se, bt.observed - qlo * bt.se, "bootT", confidence)


class PValues(NamedTuple):
    lower: float
    upper: float
    two_sided: float
    t: float


def bootstrap_t_pvalue(data, statistic, theta0: float, se_provider: str = "formula",
                       r: int = DEFAULT_R, seed: Union[RandomSource, int] = 0,
                       r2: int = DEFAULT_R2, workers: int = 1) -> PValues:
    """Bootstrap-t test of ``theta = theta0``.

    The lower P-value is the interpolated t* CDF at
    ``t = (theta_hat - theta0) / S`` (:func:`interp_cdf`), which makes the
    test reject at level ``alpha`` exactly when :func:`bootstrap_t_interval`
    at confidence ``1 - alpha`` excludes ``theta0``.
    """
    bt = bootstrap_t_distribution(data, statistic, se_provider, r, seed, r2, workers)
    return _bootstrap_t_pvalue_from(bt, theta0)


def _bootstrap_t_pvalue_from(bt: BootstrapT, theta0):
    if bt.se <= 0:
        raise DistributionDegenerateError("standard error of the data is zero")
    t = (bt.observed - theta0) / bt.se
    lower = interp_cdf(bt.tstar, t)
    upper = 1 - lower
    return PValues(lower, upper, min(1.0, 2 * min(lower, upper)), t)


def mc_error_proportion(p_hat: float, r: int) -> float:
    """``sqrt(p (1 - p) / r)``."""
    if r < 2:
        raise InvalidInputError("r must be >= 2")
    return math.sqrt(p_hat * (1 - p_hat) / r)


def mc_error_mean(s_b: float, r: int) -> float:
    """``s_B / sqrt(r)``: Monte Carlo SE of the replicate mean (and hence the bias)."""
    if r < 2:
        raise InvalidInputError("r must be >= 2")
    return s_b / math.sqrt(r)


def mc_error_se(s_b: float, r: int) -> float:
    """``s_B / sqrt(2 r)``: Monte Carlo SE of ``s_B`` for a near-normal bootstrap distribution."""
    if r < 2:
        raise InvalidInputError("r must be >= 2")
    return s_b / math.sqrt(2 * r)


def mc_error_quantile(replicates, p: float, outer_r: int = 200,
                      seed: Union[RandomSource, int] = 0) -> float:
    """Monte Carlo SE of a replicate quantile by resampling the replicates."""
    x = np.asarray(replicates, dtype=float)
    if x.size < 2:
        raise InvalidInputError("r must be >= 2")
    if outer_r < 100:
        raise InvalidInputError("outer_r must be >= 100")
    rs = seed if isinstance(seed, RandomSource) else RandomSource(int(seed), path=(0x6D63,))
    gen = rs.generator()
    out = np.empty(outer_r)
    # rows processed in blocks to bound memory for large r
    block = max(1, 2_000_000 // x.size)
    for start in range(0, outer_r, block):
        k = min(block, outer_r - start)
        rows = np.sort(x[gen.integers(0, x.size, (k, x.size))], axis=1)
        out[start:start + k] = _sorted_quantiles(rows, p)
    return float(np.std(out, ddof=1))


def mc_error(kind: str, **kw) -> float:
    """Monte Carlo standard error.

    ``mc_error('proportion', p_hat=..., r=...)``,
    ``mc_error('mean', s_b=..., r=...)``,
    ``mc_error('se', s_b=..., r=...)``, or
    ``mc_error('quantile', bd=..., p=..., outer_r=...)``.
    """
    if kind == "proportion":
        return mc_error_proportion(kw["p_hat"], kw["r"])
    if kind == "mean":
        return mc_error_mean(kw["s_b"], kw["r"])
    if kind == "se":
        return mc_error_se(kw["s_b"], kw["r"])
    if kind == "quantile":
        bd = kw["bd"]
        reps = bd.replicates if isinstance(bd, BootstrapDistribution) else bd
        return mc_error_quantile(reps, kw["p"], kw.get("outer_r", 200), kw.get("seed", 0))
    raise InvalidInputError("kind must be one of: proportion, mean, se, quantile")


class Tilt(NamedTuple):
    weights: np.ndarray
    tau: float


def tilting_weights(data, mu0: float) -> Tilt:
    """Exponential tilting ``w_i proportional to exp(tau x_i)`` with weighted mean ``mu0``."""
    x = as_sample(data).values
    lo, hi = x.min(), x.max()
    if not lo < mu0 < hi:
        raise InfeasibleTiltError(f"mu0={mu0} must lie strictly inside ({lo}, {hi})")
    center = x.mean()
    scale = float(np.std(x)) or 1.0
    z = (x - center) / scale

    def weights(tau):
        a = tau * z
        w = np.exp(a - a.max())
        return w / w.sum()

    def excess(tau):
        return float(weights(tau) @ x) - mu0

    if excess(0.0) == 0:
        return Tilt(np.full(x.size, 1.0 / x.size), 0.0)
    step = 1.0 if excess(0.0) < 0 else -1.0
    b = step
    while np.sign(excess(b)) == np.sign(excess(0.0)):
        b *= 2
        if abs(b) > 1e6:
            raise InfeasibleTiltError("tilting root not bracketed")
    lo_t, hi_t = sorted((0.0, b))
    tau = optimize.brentq(excess, lo_t, hi_t, xtol=1e-14, rtol=1e-15, maxiter=500)
    return Tilt(weights(tau), tau / scale)


def histogram_table(values, bins="fd") -> dict:
    """Bin edges and counts (Freedman-Diaconis width by default)."""
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins)
    return {"edges": edges.tolist(), "counts": counts.tolist()}
