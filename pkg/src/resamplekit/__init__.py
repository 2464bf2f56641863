"""Bootstrap and permutation inference.

Resampling schemes, bootstrap distributions and intervals, permutation
tests, analytic t and Edgeworth procedures, regression resampling, and a
coverage simulation harness for interval methods.
"""

from .analytic import IntervalEstimate
from .bootstrap import (
    BootstrapDistribution,
    BootstrapSummary,
    bootstrap_t_interval,
    bootstrap_t_pvalue,
    expanded_percentile_interval,
    mc_error,
    percentile_interval,
    quantile_interp,
    reverse_percentile_interval,
    run_bootstrap,
    summarize,
    t_with_bootstrap_se,
    tilting_weights,
)
from .coverage import PopulationSpec, run_coverage
from .estimators import PairedSample, Sample, StatisticSpec, TwoSample, evaluate
from .permtest import fisher_exact, independence_permutation, two_sample_permutation
from .sampling import RandomSource, SamplerSpec

__version__ = "0.1.0"
