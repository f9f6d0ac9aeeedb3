"""Max-statistic permutation testing: exhaustive and low-rank accelerated engines."""

from ._core import (
    DataError,
    NumericalError,
    UsageError,
    __version__,
    eta_min,
    gen_sim1,
    gen_sim2,
    kl_divergence,
    pvalue,
    resampling_risk,
    run_naive,
    run_rapid,
    threshold,
    tstat,
)

__all__ = [
    "DataError",
    "NumericalError",
    "UsageError",
    "__version__",
    "eta_min",
    "gen_sim1",
    "gen_sim2",
    "kl_divergence",
    "pvalue",
    "resampling_risk",
    "run_naive",
    "run_rapid",
    "threshold",
    "tstat",
]
