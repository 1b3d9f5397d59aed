"""Bayesian structure learning for stationary multivariate Gaussian time series.

The library scores decomposable graphs with the closed-form Whittle marginal
likelihood under a hyper complex inverse Wishart prior and searches graph
space stochastically.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    GenerationError,
    InputError,
    NumericalError,
    RankDeficiencyError,
    SingularMatrixError,
    StructureError,
    TsGraphError,
)
from .graphs import DecomposableGraph, GraphPriorConfig, is_decomposable, log_graph_prior, triangulate  # noqa: E402
from .likelihood import GraphScorer, HiwPrior, ScoredGraph, log_marginal_likelihood  # noqa: E402
from .search import SearchConfig, fincs_run, mh_sampler  # noqa: E402
from .spectral import SpectralStatistics, TimeSeriesPanel, aggregate_periodogram  # noqa: E402
