"""Interval coverage simulation for the mean.

For each simulated sample every requested interval is computed from one
shared set of ``r`` resample indices, so method comparisons are paired.

With variance reduction the per-sample miss indicator is replaced by its
conditional probability given the sample's configuration. For a normal
population the sample mean is independent of the residuals
``x - xbar`` and every interval here is translation equivariant, so
``P(U < mu | residuals) = Phi(-(U - xbar) sqrt(n) / sigma)``. For a gamma
population the mean is independent of ``x / xbar`` and the intervals are
scale equivariant, so ``P(U < mu | ratios) = F(mu / (U / xbar))`` with
``F`` the gamma CDF of the sample mean.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from . import _parallel
from .analytic import alpha_prime_half, gamma_cdf, normal_cdf, normal_quantile, t_quantile
from .bootstrap import _sorted_quantiles
from .errors import InvalidInputError, VRUnsupportedError
from .sampling import RandomSource

__all__ = [
    "PopulationSpec",
    "METHODS",
    "CoverageRow",
    "CoverageReport",
    "run_coverage",
    "conditional_miss",
    "simulate_t_statistics",
]

METHODS = ("t", "tSkew", "tBoot", "perc", "expanded", "reverse", "bootT")

# which conditioning each method's equivariance supports
_EQUIVARIANCE = {m: {"translation", "scale"} for m in METHODS}


@dataclass(frozen=True)
class PopulationSpec:
    """``normal(mu, sigma)``, ``exponential(mean)`` or ``gamma(shape, scale)``."""

    family: str
    params: tuple

    def __post_init__(self):
        fam, p = self.family, tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if fam == "normal":
            ok = len(p) == 2 and p[1] > 0
        elif fam == "exponential":
            ok = len(p) == 1 and p[0] > 0
        elif fam == "gamma":
            ok = len(p) == 2 and p[0] > 0 and p[1] > 0
        else:
            raise InvalidInputError(
                f"unknown population {fam!r}; valid: normal, exponential, gamma"
            )
        if not ok:
            raise InvalidInputError(f"invalid parameters for {fam}: {self.params}")

    @classmethod
    def parse(cls, text: str) -> "PopulationSpec":
        """Parse ``normal``, ``normal:0,1``, ``exponential:2``, ``gamma:9,1``."""
        name, _, args = text.partition(":")
        defaults = {"normal": (0.0, 1.0), "exponential": (1.0,), "gamma": (9.0, 1.0)}
        if name not in defaults:
            raise InvalidInputError(
                f"unknown population {name!r}; valid: {', '.join(defaults)}"
            )
        params = tuple(float(a) for a in args.split(",")) if args else defaults[name]
        return cls(name, params)

    @property
    def shape_scale(self) -> Optional[tuple]:
        if self.family == "exponential":
            return (1.0, self.params[0])
        if self.family == "gamma":
            return self.params
        return None

    @property
    def true_mean(self) -> float:
        if self.family == "normal":
            return self.params[0]
        k, theta = self.shape_scale
        return k * theta

    @property
    def conditioning(self) -> str:
        return "translation" if self.family == "normal" else "scale"

    def draw(self, size, gen: np.random.Generator) -> np.ndarray:
        if self.family == "normal":
            return gen.normal(self.params[0], self.params[1], size)
        k, theta = self.shape_scale
        if self.family == "exponential":
            return gen.exponential(theta, size)
        return gen.gamma(k, theta, size)

    def label(self) -> str:
        return f"{self.family}({','.join(f'{v:g}' for v in self.params)})"


def conditional_miss(xbar, lower, upper, pop: PopulationSpec, n: int,
                     mode: Optional[str] = None):
    """Conditional miss probabilities ``(left_p, right_p)``.

    Arrays broadcast. Left is ``P(L > mu)``, right is ``P(U < mu)``. In
    scale mode an endpoint that is not positive has no valid ratio; those
    entries are NaN and the caller falls back to the indicator.
    """
    mode = mode or pop.conditioning
    xbar = np.asarray(xbar, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    mu = pop.true_mean
    if mode == "translation":
        if pop.family != "normal":
            raise VRUnsupportedError("translation conditioning needs a normal population")
        k = math.sqrt(n) / pop.params[1]
        right = normal_cdf(-(upper - xbar) * k)
        left = 1.0 - normal_cdf(-(lower - xbar) * k)
        return left, right
    if mode == "scale":
        if pop.shape_scale is None:
            raise VRUnsupportedError("scale conditioning needs a gamma population")
        shape, scale = pop.shape_scale
        with np.errstate(divide="ignore", invalid="ignore"):
            m_up = upper / xbar
            m_lo = lower / xbar
            right = np.where(m_up > 0, gamma_cdf(mu / np.where(m_up > 0, m_up, 1.0),
                                                 n * shape, scale / n), np.nan)
            left = np.where(m_lo > 0, 1.0 - gamma_cdf(mu / np.where(m_lo > 0, m_lo, 1.0),
                                                      n * shape, scale / n), np.nan)
        return left, right
    raise InvalidInputError("mode must be 'translation' or 'scale'")


def _endpoints_chunk(start, stop, pop, n, methods, r, seed, confidence):
    """Interval endpoints for samples ``start..stop``; rows follow ``methods``."""
    a = (1 - confidence) / 2
    tcrit = float(t_quantile(1 - a, n - 1))
    ap = alpha_prime_half(n, 1 - confidence)
    need_boot = any(m in methods for m in ("tBoot", "perc", "expanded", "reverse", "bootT"))
    k = stop - start
    L = np.empty((len(methods), k))
    U = np.empty((len(methods), k))
    xbars = np.empty(k)
    dropped = 0
    sqn = math.sqrt(n)
    for j, i in enumerate(range(start, stop)):
        gen = seed.with_stream(i).generator()
        x = pop.draw(n, gen)
        xbar = x.mean()
        s = x.std(ddof=1)
        xbars[j] = xbar
        if need_boot:
            xb = x[gen.integers(0, n, (r, n))]
            means = xb.mean(axis=1)
            ms = np.sort(means)
        for mi, m in enumerate(methods):
            if m == "t":
                lo, hi = xbar - tcrit * s / sqn, xbar + tcrit * s / sqn
            elif m == "tSkew":
                d = x - xbar
                gam = np.mean(d**3) / s**3 if s > 0 else 0.0
                kappa = gam / (6 * sqn)
                c = xbar + s / sqn * kappa * (1 + 2 * tcrit**2)
                lo, hi = c - tcrit * s / sqn, c + tcrit * s / sqn
            elif m == "tBoot":
                sb = means.std(ddof=1)
                lo, hi = xbar - tcrit * sb, xbar + tcrit * sb
            elif m == "perc":
                lo, hi = _sorted_quantiles(ms, [a, 1 - a])
            elif m == "expanded":
                lo, hi = _sorted_quantiles(ms, [ap, 1 - ap])
            elif m == "reverse":
                qlo, qhi = _sorted_quantiles(ms, [a, 1 - a])
                lo, hi = 2 * xbar - qhi, 2 * xbar - qlo
            else:
                sds = xb.std(axis=1, ddof=1)
                ok = sds > 0
                dropped += int((~ok).sum())
                tstar = np.sort((means[ok] - xbar) / (sds[ok] / sqn))
                qlo, qhi = _sorted_quantiles(tstar, [a, 1 - a])
                lo, hi = xbar - qhi * s / sqn, xbar - qlo * s / sqn
            L[mi, j], U[mi, j] = lo, hi
    return L, U, xbars, np.array([dropped])


@dataclass(frozen=True)
class CoverageRow:
    method: str
    side: str
    miss: float
    mc_se: float
    indicator_miss: float
    indicator_se: float


@dataclass
class CoverageReport:
    """Per-method one-sided non-coverage estimates for one (population, n) cell.

    ``left`` misses have the interval entirely above the true mean,
    ``right`` misses have it entirely below. When ``vr`` is set ``miss`` is
    the mean conditional probability; ``indicator_miss`` is always the
    plain indicator mean from the same samples.
    """

    population: PopulationSpec
    n: int
    nsim: int
    r: int
    seed: int
    vr: bool
    confidence: float
    rows: list = field(default_factory=list)
    n_fallback: int = 0
    n_bootT_dropped: int = 0
    per_sample: dict = field(default_factory=dict, repr=False)

    def get(self, method: str, side: str) -> CoverageRow:
        for row in self.rows:
            if row.method == method and row.side == side:
                return row
        raise KeyError((method, side))

    def miss(self, method: str, side: str) -> float:
        return self.get(method, side).miss

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "side", "miss", "mc_se", "indicator_miss", "indicator_se",
                    "n", "population", "nsim", "r", "vr"])
        for row in self.rows:
            w.writerow([row.method, row.side, repr(row.miss), repr(row.mc_se),
                        repr(row.indicator_miss), repr(row.indicator_se), self.n,
                        self.population.label(), self.nsim, self.r, int(self.vr)])
        return buf.getvalue()

    def as_dict(self) -> dict:
        return {
            "population": self.population.label(),
            "n": self.n,
            "nsim": self.nsim,
            "r": self.r,
            "seed": self.seed,
            "vr": self.vr,
            "confidence": self.confidence,
            "n_fallback": self.n_fallback,
            "rows": [row.__dict__ for row in self.rows],
        }


def _mean_se(v):
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def run_coverage(pop: PopulationSpec, n: int, methods: Iterable[str] = METHODS,
                 nsim: int = 2000, r: int = 1000, seed: Union[RandomSource, int] = 0,
                 vr: bool = True, confidence: float = 0.95, workers: int = 1) -> CoverageReport:
    """Estimate left and right non-coverage of each interval method.

    Parameters
    ----------
    pop : PopulationSpec
    n : int
        Sample size.
    methods : iterable of str
        Subset of :data:`METHODS`.
    nsim : int
        Simulated samples; sample ``i`` uses stream ``i``.
    r : int
        Resamples per simulated sample, shared by all bootstrap methods.
    vr : bool
        Average conditional miss probabilities instead of indicators.
    """
    methods = tuple(methods)
    unknown = [m for m in methods if m not in METHODS]
    if unknown or not methods:
        raise InvalidInputError(
            f"unknown method(s) {unknown}; valid: {', '.join(METHODS)}"
        )
    if nsim < 100:
        raise InvalidInputError("nsim must be >= 100")
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    if r < 2:
        raise InvalidInputError("r must be >= 2")
    if vr:
        bad = [m for m in methods if pop.conditioning not in _EQUIVARIANCE[m]]
        if bad:
            raise VRUnsupportedError(
                f"{pop.conditioning} conditioning unsupported for {', '.join(bad)}"
            )
    seed_rs = seed if isinstance(seed, RandomSource) else RandomSource(int(seed))
    L, U, xbars, dropped = _parallel.map_streams(
        _endpoints_chunk, nsim, (pop, n, methods, r, seed_rs, confidence), workers
    )
    mu = pop.true_mean
    report = CoverageReport(pop, n, nsim, r, seed_rs.seed, vr, confidence,
                            n_bootT_dropped=int(dropped.sum()))
    fallback = 0
    for mi, m in enumerate(methods):
        ind_left = (L[mi] > mu).astype(float)
        ind_right = (U[mi] < mu).astype(float)
        if vr:
            left, right = conditional_miss(xbars, L[mi], U[mi], pop, n)
            fb_l, fb_r = np.isnan(left), np.isnan(right)
            fallback += int(fb_l.sum() + fb_r.sum())
            left = np.where(fb_l, ind_left, left)
            right = np.where(fb_r, ind_right, right)
        else:
            left, right = ind_left, ind_right
        report.per_sample[m] = {"left": left, "right": right,
                                "left_ind": ind_left, "right_ind": ind_right}
        for side, v, iv in (("left", left, ind_left), ("right", right, ind_right)):
            est, se = _mean_se(v)
            iest, ise = _mean_se(iv)
            report.rows.append(CoverageRow(m, side, est, se, iest, ise))
    report.n_fallback = fallback
    return report


def simulate_t_statistics(pop: PopulationSpec, n: int, nsim: int,
                          seed: Union[RandomSource, int] = 0, batch: int = 10_000) -> np.ndarray:
    """``(xbar - mu) / (s / sqrt(n))`` for ``nsim`` simulated samples."""
    seed_rs = seed if isinstance(seed, RandomSource) else RandomSource(int(seed))
    out = np.empty(nsim)
    for b, start in enumerate(range(0, nsim, batch)):
        k = min(batch, nsim - start)
        x = pop.draw((k, n), seed_rs.with_stream(b).generator())
        out[start:start + k] = (x.mean(axis=1) - pop.true_mean) / (x.std(axis=1, ddof=1) / math.sqrt(n))
    return out
