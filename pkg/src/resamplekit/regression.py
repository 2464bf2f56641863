"""Least squares and regression resampling.

Schemes: resample rows (``observations``), resample residuals onto the
fixed fitted values (``residuals``), draw 0/1 responses from supplied
probabilities (``conditional-bernoulli``), and draw each residual from
the ``k`` observations with the nearest fitted values
(``residuals-nearby``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .bootstrap import BootstrapDistribution, _drop_undefined
from .errors import DegenerateError, InvalidInputError, SingularDesignError
from .sampling import RandomSource

__all__ = [
    "LinearFit",
    "design_matrix",
    "fit_ols",
    "REGRESSION_SCHEMES",
    "bootstrap_regression",
    "emit_fit_band",
    "band_csv",
]

REGRESSION_SCHEMES = ("observations", "residuals", "conditional-bernoulli", "residuals-nearby")


@dataclass(frozen=True)
class LinearFit:
    coefficients: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    r_squared: float
    residual_sd: float
    n: int
    p: int
    slope_se: Optional[float] = None

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def slope(self) -> float:
        return float(self.coefficients[1])

    def predict(self, X) -> np.ndarray:
        return design_matrix(X) @ self.coefficients


def design_matrix(X) -> np.ndarray:
    """Prepend an intercept column to ``X`` (1-D for simple regression)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidInputError("X must be 1-D or 2-D")
    return np.column_stack([np.ones(X.shape[0]), X])


def _fit(D, y, x_simple=None) -> LinearFit:
    n, p = D.shape
    if n <= p:
        raise InvalidInputError(f"need more observations than coefficients (n={n}, p={p})")
    if np.linalg.matrix_rank(D) < p:
        raise SingularDesignError("design matrix is rank deficient")
    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
    fitted = D @ coef
    resid = y - fitted
    sse = float(resid @ resid)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    r2 = min(1.0, max(0.0, r2))
    s_r = math.sqrt(sse / (n - p))
    slope_se = None
    if x_simple is not None:
        slope_se = s_r / math.sqrt(float(np.sum((x_simple - x_simple.mean()) ** 2)))
    return LinearFit(coef, fitted, resid, r2, s_r, n, p, slope_se)


def fit_ols(X, y) -> LinearFit:
    """Ordinary least squares with an intercept.

    Parameters
    ----------
    X : array_like, shape (n,) or (n, k)
        Predictors, without the intercept column.
    y : array_like, shape (n,)

    Raises
    ------
    SingularDesignError
        If the design lacks full column rank.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.size:
        raise InvalidInputError("X and y have different numbers of rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise InvalidInputError("X and y must be finite")
    simple = X if X.ndim == 1 else (X[:, 0] if X.shape[1] == 1 else None)
    return _fit(design_matrix(X), y, simple)


_NAMED = {
    "slope": lambda f: f.slope,
    "intercept": lambda f: f.intercept,
    "r-squared": lambda f: f.r_squared,
    "residual-sd": lambda f: f.residual_sd,
}


def _statistic(stat) -> Callable[[LinearFit], float]:
    if callable(stat):
        return stat
    if stat in _NAMED:
        return _NAMED[stat]
    if isinstance(stat, str) and stat.startswith("coef:"):
        j = int(stat[5:])
        return lambda f: float(f.coefficients[j])
    raise InvalidInputError(
        f"unknown fit statistic {stat!r}; valid: {', '.join(_NAMED)}, coef:<index>"
    )


def _nearby_pools(fitted, k):
    # for each i, indices of the k observations with the closest fitted
    # values, as a window in fitted-value order shifted inward at the ends
    n = fitted.size
    order = np.argsort(fitted, kind="stable")
    rank = np.empty(n, int)
    rank[order] = np.arange(n)
    start = np.clip(rank - (k - 1) // 2, 0, n - k)
    return order[start[:, None] + np.arange(k)]


class _Scheme:
    def __init__(self, X, y, scheme, probabilities, k):
        if scheme not in REGRESSION_SCHEMES:
            raise InvalidInputError(
                f"unknown scheme {scheme!r}; valid: {', '.join(REGRESSION_SCHEMES)}"
            )
        self.D = design_matrix(X)
        self.y = np.asarray(y, dtype=float)
        X = np.asarray(X, dtype=float)
        self.simple = X if X.ndim == 1 else (X[:, 0] if X.shape[1] == 1 else None)
        self.scheme = scheme
        self.n = self.y.size
        self.fit = _fit(self.D, self.y, self.simple)
        if scheme == "conditional-bernoulli":
            if probabilities is None:
                raise InvalidInputError("conditional-bernoulli needs probabilities")
            p = np.asarray(probabilities, dtype=float)
            if p.shape != self.y.shape or np.any((p < 0) | (p > 1)):
                raise InvalidInputError("probabilities must lie in [0, 1], one per row")
            self.prob = p
        if scheme == "residuals-nearby":
            if not 2 <= k <= self.n:
                raise InvalidInputError(f"window k must satisfy 2 <= k <= n, got {k}")
            self.pools = _nearby_pools(self.fit.fitted, k)

    def draw(self, gen):
        """Return (design, response, x_simple) for one resample."""
        n = self.n
        if self.scheme == "observations":
            rows = gen.integers(0, n, n)
            xs = None if self.simple is None else self.simple[rows]
            return self.D[rows], self.y[rows], xs
        if self.scheme == "residuals":
            e = self.fit.residuals[gen.integers(0, n, n)]
        elif self.scheme == "residuals-nearby":
            pick = self.pools[np.arange(n), gen.integers(0, self.pools.shape[1], n)]
            e = self.fit.residuals[pick]
        else:
            return self.D, (gen.random(n) < self.prob).astype(float), self.simple
        return self.D, self.fit.fitted + e, self.simple


def _refit(scheme, gen):
    D, y, xs = scheme.draw(gen)
    return _fit(D, y, xs)


def bootstrap_regression(X, y, scheme: str = "residuals", statistic: Union[str, Callable] = "slope",
                         r: int = 10_000, seed: Union[RandomSource, int] = 0,
                         probabilities=None, k: int = 20) -> BootstrapDistribution:
    """Bootstrap a statistic of the least-squares fit.

    Residual-type schemes keep ``X`` fixed. Under ``observations``,
    resamples whose design is rank deficient are excluded and tallied;
    more than 1% excluded raises :class:`DistributionDegenerateError`.
    """
    if r < 1:
        raise InvalidInputError("r must be >= 1")
    seed = seed if isinstance(seed, RandomSource) else RandomSource(int(seed))
    sch = _Scheme(X, y, scheme, probabilities, min(k, len(np.asarray(y))))
    fn = _statistic(statistic)
    values = np.empty(r)
    for i in range(r):
        try:
            values[i] = fn(_refit(sch, seed.with_stream(i).generator()))
        except (DegenerateError, InvalidInputError):
            values[i] = np.nan
    values, n_bad = _drop_undefined(values)
    return BootstrapDistribution(values, float(fn(sch.fit)), statistic if isinstance(statistic, str) else None,
                                 None, seed, (sch.n,), n_bad)


def emit_fit_band(X, y, scheme: str = "observations", r: int = 100, grid=None,
                  seed: Union[RandomSource, int] = 0, probabilities=None, k: int = 20) -> np.ndarray:
    """Predictions of bootstrapped regression lines at each grid point.

    Returns an array of shape ``(len(grid), r')`` where ``r'`` is ``r`` less
    any rank-deficient resamples.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 1 and not (X.ndim == 2 and X.shape[1] == 1):
        raise InvalidInputError("fit bands are for simple regression only")
    X = X.ravel()
    grid = np.linspace(X.min(), X.max(), 11) if grid is None else np.asarray(grid, dtype=float)
    seed = seed if isinstance(seed, RandomSource) else RandomSource(int(seed))
    sch = _Scheme(X, y, scheme, probabilities, min(k, X.size))
    G = design_matrix(grid)
    cols = []
    for i in range(r):
        try:
            cols.append(G @ _refit(sch, seed.with_stream(i).generator()).coefficients)
        except DegenerateError:
            continue
    if not cols:
        raise InvalidInputError("every resample was rank deficient")
    return np.column_stack(cols)


def band_csv(grid, band: np.ndarray) -> str:
    """CSV rows ``grid_x,replicate,prediction``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["grid_x", "replicate", "prediction"])
    for gx, row in zip(np.asarray(grid, dtype=float), band):
        for j, v in enumerate(row):
            w.writerow([repr(float(gx)), j, repr(float(v))])
    return buf.getvalue()
