"""Analytics engine for stochastic two-sided platforms.

Closed-form first-exceedance functionals over a truncated bivariate power
series calculus, cross-validated against an exact dynamic program and a
reproducible Monte Carlo simulator, plus payoff optimization over the
attraction factor and the platform capacity.
"""

from .exceptions import (
    ConfigError,
    DomainError,
    ExtractionError,
    NonTerminationError,
    PrecisionError,
    SingularSeriesError,
    SweepError,
)
from .model import (
    ALL_ONES,
    DelayDistribution,
    FunctionalArgs,
    PlatformConfig,
    RateParams,
    attraction_rate,
    gamma_joint,
    laplace_transform,
)
from .series import (
    PgfArray,
    TruncatedSeries2,
    d_forward,
    d_inverse,
    d_transform_series,
    expand_gamma_series,
    gamma_series_fixed_z,
    pgf_extract,
    series_mul,
    series_reciprocal,
)
from .exceedance import (
    GeometricParams,
    TransformBundle,
    build_bundle,
    geometric_params,
    mean_customers_capped,
    mean_customers_capped_mixture,
    memoryless_residuals,
    memoryless_supplier_pgf,
    phi_functional,
    supplier_pgf,
    supplier_pmf,
    xi_term,
)
from .openmodel import (
    PayoffParams,
    alpha_star_open,
    exit_index_open,
    mean_customers_given_b,
    mean_customers_open,
    open_payoff,
    truncated_poisson_pmf,
)
from .oracle import ExitLaw, PayoffTerms, dp_oracle, dp_payoff_terms, increment_grid, initial_grid
from .simulate import (
    ExitRecord,
    RunSeed,
    SimEstimate,
    empirical_pmf,
    estimate,
    simulate_path,
)
from .payoff import (
    AlphaOptimum,
    DpOracleEngine,
    MonteCarloEngine,
    OpenFormEngine,
    PayoffEstimate,
    PayoffSurface,
    optimize_alpha,
    payoff,
    sweep_surface,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_ONES",
    "AlphaOptimum",
    "ConfigError",
    "DelayDistribution",
    "DomainError",
    "DpOracleEngine",
    "ExitLaw",
    "ExitRecord",
    "ExtractionError",
    "FunctionalArgs",
    "GeometricParams",
    "MonteCarloEngine",
    "NonTerminationError",
    "OpenFormEngine",
    "PayoffEstimate",
    "PayoffParams",
    "PayoffSurface",
    "PayoffTerms",
    "PgfArray",
    "PlatformConfig",
    "PrecisionError",
    "RateParams",
    "RunSeed",
    "SimEstimate",
    "SingularSeriesError",
    "SweepError",
    "TransformBundle",
    "TruncatedSeries2",
    "alpha_star_open",
    "attraction_rate",
    "build_bundle",
    "d_forward",
    "d_inverse",
    "d_transform_series",
    "dp_oracle",
    "dp_payoff_terms",
    "empirical_pmf",
    "estimate",
    "exit_index_open",
    "expand_gamma_series",
    "gamma_joint",
    "gamma_series_fixed_z",
    "geometric_params",
    "increment_grid",
    "initial_grid",
    "laplace_transform",
    "mean_customers_capped",
    "mean_customers_capped_mixture",
    "mean_customers_given_b",
    "mean_customers_open",
    "memoryless_residuals",
    "memoryless_supplier_pgf",
    "open_payoff",
    "optimize_alpha",
    "payoff",
    "pgf_extract",
    "phi_functional",
    "series_mul",
    "series_reciprocal",
    "simulate_path",
    "supplier_pgf",
    "supplier_pmf",
    "sweep_surface",
    "truncated_poisson_pmf",
    "xi_term",
]
