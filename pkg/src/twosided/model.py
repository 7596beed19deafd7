"""Model parameters and the elementary transforms every other module consumes.

A two-sided platform is watched at the epochs of a delayed renewal process.
Customer and supplier arrivals are Poisson flows, so the joint law of the
per-epoch increments is fully described by the Laplace transform of the
inter-observation delay.  Everything downstream (series evaluation, dynamic
programming, simulation) is built on the three operations defined here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal, Tuple

from .exceptions import DomainError

Coupling = Literal["static", "attraction"]

RatePair = Tuple[float, float]


@dataclass(frozen=True)
class DelayDistribution:
    """Law of one observation delay.

    ``kind`` is ``"exponential"`` (``param`` is the rate) or
    ``"deterministic"`` (``param`` is the fixed duration).
    """

    kind: Literal["exponential", "deterministic"]
    param: float

    def __post_init__(self):
        if self.kind not in ("exponential", "deterministic"):
            raise DomainError(f"unknown delay kind {self.kind!r}")
        if not (self.param > 0.0) or not math.isfinite(self.param):
            raise DomainError("delay parameter must be strictly positive")

    @classmethod
    def exponential(cls, rate: float) -> "DelayDistribution":
        return cls("exponential", float(rate))

    @classmethod
    def deterministic(cls, duration: float) -> "DelayDistribution":
        return cls("deterministic", float(duration))

    @property
    def mean(self) -> float:
        """Expected delay duration."""
        if self.kind == "exponential":
            return 1.0 / self.param
        return self.param


def laplace_transform(dist: DelayDistribution, theta: float) -> float:
    """E[exp(-theta * delay)] for theta >= 0; equals 1 exactly at theta = 0."""
    if theta < 0.0:
        raise DomainError("laplace_transform requires theta >= 0")
    if theta == 0.0:
        return 1.0
    if dist.kind == "exponential":
        return dist.param / (dist.param + theta)
    return math.exp(-theta * dist.param)


def gamma_joint(rates: RatePair, dist: DelayDistribution, z: float, g: float) -> float:
    """Joint increment transform E[z^X * g^Y] for one observation interval.

    ``rates`` is the (customer, supplier) intensity pair.  With the
    initial-batch intensities and the initial delay this same function
    realizes the initial-batch transform.
    """
    la, lb = rates
    if not (0.0 <= z <= 1.0) or not (0.0 <= g <= 1.0):
        raise DomainError("gamma_joint arguments must lie in [0, 1]")
    return laplace_transform(dist, la * (1.0 - z) + lb * (1.0 - g))


@dataclass(frozen=True)
class RateParams:
    """Arrival intensities for both sides plus the initial-batch intensities."""

    lambda_a: float
    lambda_b: float
    lambda_a0: float = 0.0
    lambda_b0: float = 0.0

    def __post_init__(self):
        if not (self.lambda_a > 0.0) or not (self.lambda_b > 0.0):
            raise DomainError("lambda_a and lambda_b must be strictly positive")
        if self.lambda_a0 < 0.0 or self.lambda_b0 < 0.0:
            raise DomainError("initial-batch intensities must be nonnegative")

    @property
    def main(self) -> RatePair:
        return (self.lambda_a, self.lambda_b)

    @property
    def initial(self) -> RatePair:
        return (self.lambda_a0, self.lambda_b0)


@dataclass(frozen=True)
class PlatformConfig:
    """Full parameter set of a two-sided platform scenario.

    ``delta`` is the law of the inter-observation delays, ``tau0`` the law of
    the initial delay.  ``capacity`` is the platform capacity both sides are
    measured against.  ``coupling`` selects whether the customer intensity is
    fixed ("static") or driven by the current supplier count ("attraction").
    Every closed-form evaluation requires static coupling; the attraction
    variant is reachable through the simulator and the dynamic program.
    """

    rates: RateParams
    delta: DelayDistribution
    tau0: DelayDistribution
    capacity: int
    alpha: float = 1.0
    b0: float = 0.0
    coupling: Coupling = "static"

    def __post_init__(self):
        if int(self.capacity) != self.capacity or self.capacity < 1:
            raise DomainError("capacity must be a positive integer")
        if self.alpha < 1.0:
            raise DomainError("attraction factor alpha must be >= 1")
        if self.b0 < 0.0:
            raise DomainError("b0 must be nonnegative")
        if self.coupling not in ("static", "attraction"):
            raise DomainError(f"unknown coupling {self.coupling!r}")
        if self.coupling == "attraction" and self.b0 != int(self.b0):
            # the attraction simulator/DP start the supplier count at exactly b0
            raise DomainError("attraction coupling requires an integer b0")

    @property
    def mass_a(self) -> float:
        """Mean customer count per observation interval, lambda_a * E[delay]."""
        return self.rates.lambda_a * self.delta.mean

    @property
    def mass_b(self) -> float:
        return self.rates.lambda_b * self.delta.mean

    @property
    def mass_a0(self) -> float:
        return self.rates.lambda_a0 * self.tau0.mean

    @property
    def mass_b0(self) -> float:
        return self.rates.lambda_b0 * self.tau0.mean

    def with_capacity(self, m: int) -> "PlatformConfig":
        return replace(self, capacity=int(m))

    def with_alpha(self, alpha: float) -> "PlatformConfig":
        return replace(self, alpha=float(alpha))


def attraction_rate(config: PlatformConfig, b: float) -> float:
    """Customer intensity induced by ``b`` present suppliers.

    The supplier side is the dominant one: the customer rate scales with the
    attraction factor and the supplier count, saturating at the capacity.
    """
    if b < 0:
        raise DomainError("supplier count must be nonnegative")
    effective = min(b, config.capacity)
    return config.rates.lambda_a * config.alpha * effective / config.delta.mean


@dataclass(frozen=True)
class FunctionalArgs:
    """Arguments of the joint exit functional; the supported domain is [0, 1].

    Values above 1 may leave the convergence region of the series expansions
    and are rejected.
    """

    xi: float = 1.0
    z0: float = 1.0
    z1: float = 1.0
    g0: float = 1.0
    g1: float = 1.0

    def __post_init__(self):
        for name in ("xi", "z0", "z1", "g0", "g1"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"functional argument {name}={v} outside [0, 1]")


ALL_ONES = FunctionalArgs()
