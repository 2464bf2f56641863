"""Random streams and resampling schemes.

Every random draw in the package comes from a :class:`RandomSource`, a
``(seed, stream)`` pair mapped to an independent Philox generator. Resample
``i`` of a bootstrap uses stream ``i``, so results do not depend on how
replicates are scheduled across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .estimators import PairedSample, Sample, TwoSample, as_sample

__all__ = [
    "RandomSource",
    "ParametricModel",
    "SamplerSpec",
    "SAMPLER_VARIANTS",
    "draw_with_replacement",
    "draw_permutation_split",
    "draw_bootknife",
    "draw_smoothed",
    "draw_finite_population",
    "draw_parametric",
    "poisson_weights",
    "resample",
]

_U64 = 2**64


@dataclass(frozen=True)
class RandomSource:
    """Deterministic random stream.

    ``path`` holds the stream indices of enclosing levels, so nested
    resampling (a bootstrap inside a simulation, a second-level bootstrap
    inside a replicate) gets its own non-overlapping streams via
    :meth:`child`.
    """

    seed: int = 0
    stream: int = 0
    path: tuple = ()

    def __post_init__(self):
        for v in (self.seed, self.stream, *self.path):
            if not 0 <= int(v) < _U64:
                raise InvalidInputError("seed and stream must be 64-bit unsigned integers")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(*self.path, int(self.stream)))
        return np.random.Generator(np.random.Philox(ss))

    def with_stream(self, stream: int) -> "RandomSource":
        return RandomSource(self.seed, stream, self.path)

    def child(self, stream: int = 0) -> "RandomSource":
        """Stream ``stream`` of the family nested under this source."""
        return RandomSource(self.seed, stream, (*self.path, int(self.stream)))


def _rng(rng) -> np.random.Generator:
    if isinstance(rng, RandomSource):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise InvalidInputError("rng must be a RandomSource or numpy Generator")


_PARAMETRIC_FAMILIES = {
    "normal": ("mu", "sigma"),
    "exponential": ("mean",),
    "gamma": ("shape", "scale"),
    "binomial": ("m", "p"),
}


@dataclass(frozen=True)
class ParametricModel:
    family: str
    params: tuple

    def __post_init__(self):
        if self.family not in _PARAMETRIC_FAMILIES:
            raise InvalidInputError(
                f"unknown model {self.family!r}; valid: {', '.join(_PARAMETRIC_FAMILIES)}"
            )
        names = _PARAMETRIC_FAMILIES[self.family]
        if len(self.params) != len(names):
            raise InvalidInputError(f"{self.family} takes parameters {names}")
        bad = False
        if self.family == "normal":
            bad = not self.params[1] > 0
        elif self.family == "exponential":
            bad = not self.params[0] > 0
        elif self.family == "gamma":
            bad = not (self.params[0] > 0 and self.params[1] > 0)
        elif self.family == "binomial":
            m, p = self.params
            bad = not (int(m) == m and m >= 0 and 0 <= p <= 1)
        if bad:
            raise InvalidInputError(f"invalid {self.family} parameters {self.params}")

    def draw(self, n: int, gen: np.random.Generator) -> np.ndarray:
        a = self.params
        if self.family == "normal":
            return gen.normal(a[0], a[1], n)
        if self.family == "exponential":
            return gen.exponential(a[0], n)
        if self.family == "gamma":
            return gen.gamma(a[0], a[1], n)
        return gen.binomial(int(a[0]), a[1], n).astype(float)


SAMPLER_VARIANTS = (
    "with-replacement",
    "reduced",
    "bootknife",
    "smoothed",
    "finite-population",
    "parametric",
    "poisson-weights",
)


@dataclass(frozen=True)
class SamplerSpec:
    """How to draw one resample.

    Parameters
    ----------
    variant : str
        One of :data:`SAMPLER_VARIANTS`. ``reduced`` draws ``n - 1``
        points with replacement.
    n_out : int, optional
        Resample size override ("what if the sample had been 200?").
    bandwidth : float, optional
        Smoothed bootstrap kernel SD; ``None`` means ``s / sqrt(n)``.
    log_scale : bool
        Smooth on the log scale (positive data only).
    population_size : int, optional
        ``N`` for the finite-population bootstrap.
    rounding : {'up', 'down', 'randomized'}
        Copies per observation when ``N / n`` is fractional.
    omit : {'cyclic', 'random'}
        Bootknife omission rule.
    model : ParametricModel, optional
        Required for the parametric variant.
    """

    variant: str = "with-replacement"
    n_out: Optional[int] = None
    bandwidth: Optional[float] = None
    log_scale: bool = False
    population_size: Optional[int] = None
    rounding: str = "up"
    omit: str = "cyclic"
    model: Optional[ParametricModel] = field(default=None)

    def __post_init__(self):
        if self.variant not in SAMPLER_VARIANTS:
            raise InvalidInputError(
                f"unknown sampler {self.variant!r}; valid: {', '.join(SAMPLER_VARIANTS)}"
            )
        if self.n_out is not None and self.n_out < 1:
            raise InvalidInputError("n_out must be a positive integer")
        if self.bandwidth is not None and self.bandwidth < 0:
            raise InvalidInputError("bandwidth must be nonnegative")
        if self.rounding not in ("up", "down", "randomized"):
            raise InvalidInputError("rounding must be up, down or randomized")
        if self.omit not in ("cyclic", "random"):
            raise InvalidInputError("omit must be cyclic or random")
        if self.variant == "finite-population" and not self.population_size:
            raise InvalidInputError("finite-population sampling needs population_size")
        if self.variant == "parametric" and self.model is None:
            raise InvalidInputError("parametric sampling needs a model")


def _values(data) -> np.ndarray:
    return as_sample(data).values


def draw_with_replacement(data, n_out: Optional[int], rng) -> np.ndarray:
    """Draw ``n_out`` points with replacement (default ``n_out = n``)."""
    x = _values(data)
    n_out = x.size if n_out is None else int(n_out)
    if n_out < 1:
        raise InvalidInputError("n_out must be >= 1")
    gen = _rng(rng)
    return x[gen.integers(0, x.size, n_out)]


def draw_permutation_split(pooled, n1: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Random relabelling: ``n1`` points without replacement, and the rest."""
    x = _values(pooled)
    if not 1 <= n1 < x.size:
        raise InvalidInputError(f"n1 must satisfy 1 <= n1 < {x.size}, got {n1}")
    perm = _rng(rng).permutation(x.size)
    return x[perm[:n1]], x[perm[n1:]]


def draw_bootknife(data, rng, omit: str = "cyclic", index: Optional[int] = None,
                   n_out: Optional[int] = None) -> np.ndarray:
    """Omit one observation, then draw ``n`` with replacement from the rest.

    With ``omit='cyclic'`` the omitted point is ``index mod n``; ``index``
    defaults to the stream number of ``rng`` when it is a RandomSource.
    """
    x = _values(data)
    n = x.size
    if n < 2:
        raise InvalidInputError("bootknife needs n >= 2")
    gen = _rng(rng)
    if omit == "cyclic":
        if index is None:
            if not isinstance(rng, RandomSource):
                raise InvalidInputError("cyclic omission needs an index")
            index = rng.stream
        drop = int(index) % n
    elif omit == "random":
        drop = int(gen.integers(0, n))
    else:
        raise InvalidInputError("omit must be cyclic or random")
    kept = np.delete(x, drop)
    return kept[gen.integers(0, n - 1, n if n_out is None else n_out)]


def default_bandwidth(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def draw_smoothed(data, h: Optional[float], log_scale: bool, rng,
                  n_out: Optional[int] = None) -> np.ndarray:
    """Bootstrap sample plus independent normal(0, h) noise.

    ``h=None`` uses ``s / sqrt(n)`` (on the log scale when ``log_scale``).
    """
    x = _values(data)
    if log_scale:
        if np.any(x <= 0):
            raise InvalidInputError("log-scale smoothing needs positive data")
        x = np.log(x)
    if h is None:
        h = default_bandwidth(x)
    if h < 0:
        raise InvalidInputError("bandwidth must be nonnegative")
    gen = _rng(rng)
    n_out = x.size if n_out is None else n_out
    out = x[gen.integers(0, x.size, n_out)]
    if h > 0:
        out = out + gen.normal(0.0, h, n_out)
    return np.exp(out) if log_scale else out


def _fpc_ratio(n: int, copies: int) -> float:
    # bootstrap variance of the mean relative to sigma_hat^2 / n when
    # sampling n without replacement from `copies` replicas of the data
    return n * (copies - 1) / (copies * n - 1)


def round_up_fraction(n: int, N: int) -> float:
    """Probability of using ceil(N/n) copies in randomized rounding.

    Chosen so the mixture's bootstrap variance of the mean matches the
    finite population factor ``(N - n) / (N - 1)``.
    """
    lo = N // n
    if lo * n == N:
        return 0.0
    f_lo, f_hi = _fpc_ratio(n, lo), _fpc_ratio(n, lo + 1)
    target = (N - n) / (N - 1)
    return float(min(1.0, max(0.0, (target - f_lo) / (f_hi - f_lo))))


def draw_finite_population(data, N: int, rounding: str, rng,
                           n_out: Optional[int] = None) -> np.ndarray:
    """Sample without replacement from a pseudo-population of data replicas."""
    x = _values(data)
    n = x.size
    if N < n:
        raise InvalidInputError(f"population size N={N} is smaller than n={n}")
    gen = _rng(rng)
    if rounding == "up":
        copies = -(-N // n)
    elif rounding == "down":
        copies = N // n
    elif rounding == "randomized":
        copies = N // n + (gen.random() < round_up_fraction(n, N))
    else:
        raise InvalidInputError("rounding must be up, down or randomized")
    population = np.tile(x, copies)
    k = n if n_out is None else n_out
    if k > population.size:
        raise InvalidInputError("resample larger than the pseudo-population")
    return population[gen.choice(population.size, k, replace=False)]


def draw_parametric(model: ParametricModel, n: int, rng) -> np.ndarray:
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    return model.draw(n, _rng(rng))


def poisson_weights(n: int, rng) -> np.ndarray:
    """Independent Poisson(1) multiplicities, approximating bootstrap counts."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    return _rng(rng).poisson(1.0, n).astype(float)


def _draw_one(x: np.ndarray, spec: SamplerSpec, rs: RandomSource, gen):
    """One resample of a single group; returns (values, weights)."""
    n_out = spec.n_out
    v = spec.variant
    if v == "with-replacement":
        return draw_with_replacement(x, n_out, gen), None
    if v == "reduced":
        if x.size < 2:
            raise InvalidInputError("reduced sampling needs n >= 2")
        return draw_with_replacement(x, n_out or x.size - 1, gen), None
    if v == "bootknife":
        return draw_bootknife(x, gen, spec.omit, rs.stream, n_out), None
    if v == "smoothed":
        return draw_smoothed(x, spec.bandwidth, spec.log_scale, gen, n_out), None
    if v == "finite-population":
        return draw_finite_population(x, spec.population_size, spec.rounding, gen, n_out), None
    if v == "parametric":
        return draw_parametric(spec.model, n_out or x.size, gen), None
    return x, poisson_weights(x.size, gen)


def resample(data, spec: SamplerSpec, rs: RandomSource):
    """Draw one resample of ``data`` on stream ``rs``.

    Two-sample data are resampled group by group at their own sizes;
    paired data are resampled by rows. Returns None when Poisson weights
    come out all zero (a resample with no mass).
    """
    gen = rs.generator()
    if isinstance(data, TwoSample):
        out = []
        for g in (data.group1, data.group2):
            vals, w = _draw_one(g.values, spec, rs, gen)
            if w is not None and not w.any():
                return None
            out.append(Sample(vals, w))
        return TwoSample(*out)
    if isinstance(data, PairedSample):
        n = data.n
        if spec.variant == "poisson-weights":
            w = poisson_weights(n, gen)
            return PairedSample(data.x, data.y, w) if w.any() else None
        if spec.variant not in ("with-replacement", "reduced", "bootknife"):
            raise InvalidInputError(f"{spec.variant} sampling is not defined for paired data")
        idx = np.arange(n, dtype=float)
        if spec.variant == "bootknife":
            rows = draw_bootknife(idx, gen, spec.omit, rs.stream, spec.n_out)
        else:
            size = spec.n_out or (n - 1 if spec.variant == "reduced" else n)
            rows = draw_with_replacement(idx, size, gen)
        rows = rows.astype(int)
        return PairedSample(data.x[rows], data.y[rows])
    vals, w = _draw_one(as_sample(data).values, spec, rs, gen)
    if w is not None and not w.any():
        return None
    return Sample(vals, w)
