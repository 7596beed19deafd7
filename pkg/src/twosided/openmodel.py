"""Unbounded-capacity ("open") platform approximations and their payoff.

When the capacity is large the supplier side grows essentially linearly, the
customer exit index is a deterministic function of the supplier count, and
both the mean customer count and the payoff have closed forms.  These are
approximations whose regime of validity is probed by the Monte Carlo
cross-checks in the test suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .model import PlatformConfig, attraction_rate
from .series import PgfArray


@dataclass(frozen=True)
class PayoffParams:
    """Unit revenue per customer (c0) and unit cost per supplier (c1).

    Either sign is permitted; the platform may earn or pay on each side.
    """

    c0: float
    c1: float


def exit_index_open(config: PlatformConfig, b: float) -> int:
    """Expected customer exit index given ``b`` suppliers at exit.

    In the open regime the supplier count grows by lambda_b * E[delay] per
    epoch from its initial level b0, so reaching ``b`` takes about
    (b - b0) / (lambda_b * E[delay]) observations.
    """
    if b < config.b0:
        raise DomainError("supplier count below the initial level b0")
    return int(math.floor((b - config.b0) / config.mass_b))


def mean_customers_given_b(config: PlatformConfig, b: float) -> float:
    """Open-model conditional mean customer count at exit given ``b`` suppliers."""
    mu = exit_index_open(config, b)
    initial = config.rates.lambda_a * config.tau0.mean
    return initial + mu * attraction_rate(config, b) * config.delta.mean


def truncated_poisson_pmf(rate_mass: float, m: int) -> PgfArray:
    """Poisson(rate_mass) pmf restricted to {0..m} and renormalized to 1."""
    if rate_mass <= 0.0:
        raise DomainError("rate mass must be strictly positive")
    if m < 0:
        raise DomainError("m must be nonnegative")
    ks = np.arange(m + 1)
    log_weights = ks * math.log(rate_mass) - rate_mass - [math.lgamma(k + 1) for k in ks]
    weights = np.exp(log_weights)
    weights /= weights.sum()
    return PgfArray(mass=weights, total=1.0)


def mean_customers_open(
    config: PlatformConfig,
    m_max: int = None,
    alpha_scaled: bool = True,
    mixing_mass: float = None,
) -> float:
    """Mean customer count at exit in the open platform.

    Mixes the per-supplier-count conditional increment over a truncated
    Poisson law for the supplier count at exit.  ``mixing_mass`` defaults to
    lambda_b * E[delay] (the supplier flow actually generates that count; the
    customer-mass variant is reachable for sensitivity comparison).  With
    ``alpha_scaled`` the increment term carries the attraction factor so that
    the mean customer count is alpha times the mean supplier count by
    construction; the unscaled literal variant is kept for diagnostics.
    """
    m_max = config.capacity if m_max is None else int(m_max)
    if m_max < 0:
        raise DomainError("m_max must be nonnegative")
    initial = config.rates.lambda_a * config.tau0.mean
    if m_max == 0:
        return initial
    mass = config.mass_b if mixing_mass is None else float(mixing_mass)
    pmf = truncated_poisson_pmf(mass, m_max)
    ks = np.arange(m_max + 1, dtype=np.float64)
    extra = np.maximum(ks - config.b0, 0.0)
    scale = config.alpha if alpha_scaled else 1.0
    increments = config.rates.lambda_a * scale * extra
    return float(np.dot(pmf.mass, initial + increments))


def open_payoff(
    config: PlatformConfig,
    pay: PayoffParams,
    literal_printed_form: bool = False,
) -> float:
    """Open-platform payoff (c0 - c1/alpha) * E[customers at exit].

    Supplier cost is expressed through the customer volume via the open-model
    identity E[customers] = alpha * E[suppliers].  The breakeven is exactly
    c1/c0 and the payoff has no interior maximum in alpha.  The
    ``literal_printed_form`` flag switches to the (c0 - c1*alpha) margin for
    comparison output; that variant's breakeven is inconsistent with the
    c1/c0 rule and it is not used anywhere else.
    """
    if config.alpha <= 0.0:
        raise DomainError("alpha must be positive")
    volume = mean_customers_open(config)
    if literal_printed_form:
        return (pay.c0 - pay.c1 * config.alpha) * volume
    return (pay.c0 - pay.c1 / config.alpha) * volume


def alpha_star_open(pay: PayoffParams) -> float:
    """Smallest attraction factor at which the open platform breaks even."""
    if pay.c0 <= 0.0:
        raise DomainError("breakeven requires a positive unit revenue c0")
    return pay.c1 / pay.c0
