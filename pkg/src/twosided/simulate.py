"""Monte Carlo simulation of the coupled two-sided flows.

Only the embedded chain is simulated: per observation interval the delay is
drawn, then the two Poisson counts given the delay.  Replications run in
fixed-width blocks of lanes; block ``i`` always uses the stream derived from
``(master_seed, i)`` and every draw is full block width, so replication
identity is independent of the requested count, the worker count, and
scheduling.  Estimates assemble per-replication values in replication order
and reduce them with numpy's pairwise summation, which makes them
bit-identical across worker counts.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .exceptions import DomainError, NonTerminationError
from .model import PlatformConfig

NU_NOT_REACHED = -1

_CI99 = 2.576  # two-sided 99% normal quantile


@dataclass(frozen=True)
class RunSeed:
    """Reproducible stream derivation: block b uses child stream (master_seed, b)."""

    master_seed: int
    block_size: int = 1024

    def stream(self, block: int) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(block,))
        return np.random.default_rng(seq)


def _as_seed(seed: Union["RunSeed", int]) -> RunSeed:
    if isinstance(seed, RunSeed):
        return seed
    return RunSeed(int(seed))


@dataclass(frozen=True)
class ExitRecord:
    """Exit data of one simulated path.

    ``b_mu_prev`` / ``b_mu`` are the supplier counts one epoch before and at
    the customer exit.  ``b_nu_prev`` / ``b_nu`` track the supplier side to
    its own capacity crossing (sentinel ``nu == -1`` when the continuation
    cap was reached first; the field values are then meaningless).
    """

    mu: int
    nu: int
    a_prev: int
    a_exit: int
    b_mu_prev: int
    b_mu: int
    b_nu_prev: int
    b_nu: int
    tau_exit: float
    mu_first: bool
    under_capacity: bool


class BlockPaths:
    """Struct-of-arrays exit data for one block of simulated paths."""

    __slots__ = (
        "mu", "nu", "a_prev", "a_exit", "b_mu_prev", "b_mu",
        "b_nu_prev", "b_nu", "tau_exit", "mu_first", "under_capacity",
    )

    def __init__(self, width: int):
        self.mu = np.full(width, -1, dtype=np.int64)
        self.nu = np.full(width, -1, dtype=np.int64)
        self.a_prev = np.zeros(width, dtype=np.int64)
        self.a_exit = np.zeros(width, dtype=np.int64)
        self.b_mu_prev = np.zeros(width, dtype=np.int64)
        self.b_mu = np.zeros(width, dtype=np.int64)
        self.b_nu_prev = np.full(width, -1, dtype=np.int64)
        self.b_nu = np.full(width, -1, dtype=np.int64)
        self.tau_exit = np.zeros(width, dtype=np.float64)
        self.mu_first = np.zeros(width, dtype=bool)
        self.under_capacity = np.zeros(width, dtype=bool)

    def take(self, count: int) -> "BlockPaths":
        if count >= self.mu.size:
            return self
        out = BlockPaths(count)
        for name in self.__slots__:
            setattr(out, name, getattr(self, name)[:count])
        return out

    def record(self, lane: int) -> ExitRecord:
        return ExitRecord(
            mu=int(self.mu[lane]),
            nu=int(self.nu[lane]),
            a_prev=int(self.a_prev[lane]),
            a_exit=int(self.a_exit[lane]),
            b_mu_prev=int(self.b_mu_prev[lane]),
            b_mu=int(self.b_mu[lane]),
            b_nu_prev=int(self.b_nu_prev[lane]),
            b_nu=int(self.b_nu[lane]),
            tau_exit=float(self.tau_exit[lane]),
            mu_first=bool(self.mu_first[lane]),
            under_capacity=bool(self.under_capacity[lane]),
        )


def _draw_delay(config: PlatformConfig, rng, width: int, dist) -> np.ndarray:
    if dist.kind == "exponential":
        return rng.exponential(scale=1.0 / dist.param, size=width)
    return np.full(width, dist.param)


def _simulate_block(
    config: PlatformConfig,
    rng: np.random.Generator,
    width: int,
    max_epochs: int = 10**6,
    nu_cap: int = 10**4,
) -> BlockPaths:
    m = config.capacity
    la, lb = config.rates.main
    la0, lb0 = config.rates.initial
    attraction = config.coupling == "attraction"
    out = BlockPaths(width)

    tau0 = _draw_delay(config, rng, width, config.tau0)
    if attraction:
        a = rng.poisson(la0 * config.tau0.mean, size=width)
        b = np.full(width, int(config.b0), dtype=np.int64)
    else:
        a = rng.poisson(la0 * tau0)
        b = rng.poisson(lb0 * tau0)
    a = a.astype(np.int64)
    b = b.astype(np.int64)
    clock = tau0.copy()

    a_open = np.ones(width, dtype=bool)   # mu not found yet
    b_open = np.ones(width, dtype=bool)   # nu not found yet

    def mark_exits(epoch: int, prev_a, prev_b):
        new_mu = a_open & (a >= m)
        if new_mu.any():
            out.mu[new_mu] = epoch
            out.a_prev[new_mu] = prev_a[new_mu]
            out.a_exit[new_mu] = a[new_mu]
            out.b_mu_prev[new_mu] = prev_b[new_mu]
            out.b_mu[new_mu] = b[new_mu]
            out.tau_exit[new_mu] = clock[new_mu]
            a_open[new_mu] = False
        new_nu = b_open & (b >= m)
        if new_nu.any():
            out.nu[new_nu] = epoch
            out.b_nu_prev[new_nu] = prev_b[new_nu]
            out.b_nu[new_nu] = b[new_nu]
            b_open[new_nu] = False

    zero = np.zeros(width, dtype=np.int64)
    mark_exits(0, zero, zero)

    epoch = 0
    while (a_open | b_open).any():
        epoch += 1
        if epoch > max_epochs:
            raise NonTerminationError(
                f"paths still open after {max_epochs} epochs",
                partial={"a": a, "b": b, "mu": out.mu, "nu": out.nu, "epoch": epoch},
            )
        delay = _draw_delay(config, rng, width, config.delta)
        if attraction:
            rate_a = la * config.alpha * np.minimum(b, m) / config.delta.mean
        else:
            rate_a = la
        x = rng.poisson(rate_a * delay)
        y = rng.poisson(lb * delay)
        prev_a = a.copy()
        prev_b = b.copy()
        active_b = a_open | b_open
        a = a + np.where(a_open, x, 0)
        b = b + np.where(active_b, y, 0)
        clock = clock + np.where(a_open, delay, 0.0)
        mark_exits(epoch, prev_a, prev_b)
        # cap the post-exit supplier continuation
        capped = b_open & ~a_open & (epoch - out.mu > nu_cap)
        if capped.any():
            out.nu[capped] = NU_NOT_REACHED
            b_open[capped] = False

    out.mu_first = out.b_mu < m
    out.under_capacity = (out.a_exit + out.b_mu_prev) <= m
    return out


def simulate_path(
    config: PlatformConfig,
    rng: np.random.Generator,
    max_epochs: int = 10**6,
) -> ExitRecord:
    """One path through the two-sided flow; scalar view of the block engine."""
    return _simulate_block(config, rng, 1, max_epochs=max_epochs).record(0)


_STATISTICS = {
    "one": lambda p: np.ones(p.mu.size),
    "mu_first": lambda p: p.mu_first.astype(np.float64),
    "mu": lambda p: p.mu.astype(np.float64),
    "a_exit": lambda p: p.a_exit.astype(np.float64),
    "b_mu": lambda p: p.b_mu.astype(np.float64),
    "b_mu_prev": lambda p: p.b_mu_prev.astype(np.float64),
    "tau_exit": lambda p: p.tau_exit,
    "a_exit_mu_first": lambda p: p.a_exit * p.mu_first,
}


def _statistic_fn(statistic) -> Callable[[BlockPaths], np.ndarray]:
    if callable(statistic):
        return statistic
    try:
        return _STATISTICS[statistic]
    except KeyError:
        raise DomainError(
            f"unknown statistic {statistic!r}; known: {sorted(_STATISTICS)}"
        ) from None


@dataclass(frozen=True)
class SimEstimate:
    """Monte Carlo estimate with its 99% confidence half-width."""

    mean: float
    std_error: float
    n: int

    @property
    def ci_halfwidth(self) -> float:
        return _CI99 * self.std_error


def _collect_values(
    config: PlatformConfig,
    statistic,
    n: int,
    seed,
    workers: int = 1,
) -> np.ndarray:
    seed = _as_seed(seed)
    fn = _statistic_fn(statistic)
    width = seed.block_size
    blocks = (n + width - 1) // width

    def run_block(idx: int) -> np.ndarray:
        paths = _simulate_block(config, seed.stream(idx), width)
        keep = min(width, n - idx * width)
        return np.asarray(fn(paths.take(keep)), dtype=np.float64)

    if workers <= 1:
        parts = [run_block(i) for i in range(blocks)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_block, range(blocks)))
    return np.concatenate(parts) if parts else np.zeros(0)


def estimate(
    config: PlatformConfig,
    statistic,
    n: int,
    seed,
    workers: int = 1,
) -> SimEstimate:
    """Mean and standard error of a per-path statistic over n replications.

    ``statistic`` is a registered name or a callable on a path block
    returning one value per lane.  Deterministic for a fixed seed regardless
    of worker count.
    """
    if n < 100:
        raise DomainError("estimate requires at least 100 replications")
    values = _collect_values(config, statistic, n, seed, workers)
    mean = float(np.mean(values))
    std_error = float(np.std(values, ddof=1) / np.sqrt(n))
    return SimEstimate(mean=mean, std_error=std_error, n=n)


_SELECTORS = {
    "b_nu_prev_on_mu_first": lambda p: (p.b_nu_prev, p.mu_first & (p.nu >= 0)),
    "b_mu_prev_on_mu_first": lambda p: (p.b_mu_prev, p.mu_first),
    "b_mu_on_mu_first": lambda p: (p.b_mu, p.mu_first),
    "a_exit": lambda p: (p.a_exit, np.ones(p.mu.size, dtype=bool)),
    "a_exit_on_mu_first": lambda p: (p.a_exit, p.mu_first),
}


def empirical_pmf(
    config: PlatformConfig,
    selector,
    n: int,
    seed,
    k: int,
    workers: int = 1,
):
    """Histogram over {0..k} of one exit variable, as a (defective) pmf.

    ``selector`` names a (values, mask) extractor; masked-out paths and
    values above k contribute no mass, so conditioning yields defective
    totals.
    """
    from .series import PgfArray

    if n < 10**4:
        raise DomainError("empirical_pmf requires at least 1e4 replications")
    if callable(selector):
        extract = selector
    else:
        try:
            extract = _SELECTORS[selector]
        except KeyError:
            raise DomainError(
                f"unknown selector {selector!r}; known: {sorted(_SELECTORS)}"
            ) from None
    seed = _as_seed(seed)
    width = seed.block_size
    blocks = (n + width - 1) // width
    counts = np.zeros(k + 1, dtype=np.float64)

    def run_block(idx: int) -> np.ndarray:
        paths = _simulate_block(config, seed.stream(idx), width)
        keep = min(width, n - idx * width)
        values, mask = extract(paths.take(keep))
        values = np.asarray(values)[np.asarray(mask)]
        values = values[(values >= 0) & (values <= k)]
        return np.bincount(values.astype(np.int64), minlength=k + 1).astype(np.float64)

    if workers <= 1:
        for i in range(blocks):
            counts += run_block(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(run_block, range(blocks)):
                counts += part
    return PgfArray.from_values(counts / n)
