"""Capacity payoff evaluation and optimization over the attraction factor.

The payoff charges revenue per admitted customer and supplier costs split by
whether the exit snapshot fits inside the capacity:

    S = c0 E[A_mu] - c1 E[B_mu ; A_mu + B_prev <= M]
                   - c1 (M P{A_mu + B_prev > M} - E[A_mu ; A_mu + B_prev > M])

evaluated term-by-term from simulated exit records (Monte Carlo engine) or
from exact dynamic-programming marginals.  Optimization over the attraction
factor uses a coarse grid followed by golden-section refinement, with common
random numbers so that Monte Carlo comparisons across factors differ only
through the parameters.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import DomainError, SweepError
from .model import PlatformConfig
from .openmodel import PayoffParams, alpha_star_open, open_payoff
from .oracle import dp_payoff_terms
from .simulate import BlockPaths, RunSeed, _as_seed, estimate

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MonteCarloEngine:
    """Estimate the payoff from n simulated paths (common random numbers)."""

    n: int
    seed: Union[RunSeed, int]

    def with_seed(self, seed) -> "MonteCarloEngine":
        return MonteCarloEngine(self.n, seed)


@dataclass(frozen=True)
class DpOracleEngine:
    """Exact payoff via the dynamic program (capacity <= 12)."""


@dataclass(frozen=True)
class OpenFormEngine:
    """Closed-form open-platform payoff; breakeven at alpha = c1/c0."""


Engine = Union[MonteCarloEngine, DpOracleEngine, OpenFormEngine]


@dataclass(frozen=True)
class PayoffEstimate:
    value: float
    ci_halfwidth: float
    n: int


def _payoff_statistic(pay: PayoffParams, m: int) -> Callable[[BlockPaths], np.ndarray]:
    def per_path(paths: BlockPaths) -> np.ndarray:
        under = paths.under_capacity
        cost = np.where(under, paths.b_mu, m - paths.a_exit)
        return pay.c0 * paths.a_exit - pay.c1 * cost

    return per_path


def payoff(config: PlatformConfig, pay: PayoffParams, engine: Engine) -> PayoffEstimate:
    """Expected payoff of one configuration under the chosen engine."""
    if isinstance(engine, MonteCarloEngine):
        est = estimate(
            config, _payoff_statistic(pay, config.capacity), engine.n, engine.seed
        )
        return PayoffEstimate(est.mean, est.ci_halfwidth, est.n)
    if isinstance(engine, DpOracleEngine):
        terms = dp_payoff_terms(config)
        return PayoffEstimate(terms.payoff(pay.c0, pay.c1), 0.0, 0)
    if isinstance(engine, OpenFormEngine):
        return PayoffEstimate(open_payoff(config, pay), 0.0, 0)
    raise DomainError(f"unknown engine {engine!r}")


@dataclass(frozen=True)
class AlphaOptimum:
    alpha: float
    value: float
    at_bound: bool
    ci_overlap: Tuple[float, ...] = ()


def optimize_alpha(
    config: PlatformConfig,
    pay: PayoffParams,
    engine: Union[Engine, Callable[[float], float]],
    bounds: Tuple[float, float] = (1.0, 10.0),
    tol: float = 0.05,
    grid_points: int = 21,
) -> AlphaOptimum:
    """Best attraction factor on a box, via grid bracketing + golden section.

    A callable engine is treated as a bare objective alpha -> value (used for
    synthetic objectives and open-form delegation).  If the coarse grid peaks
    at a bound, the bound is reported rather than failing.  With the Monte
    Carlo engine all evaluations share the engine seed (common random
    numbers) and ``ci_overlap`` lists every grid factor whose confidence band
    overlaps the best cell's.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    if not (1.0 <= lo < hi):
        raise DomainError("bounds must satisfy 1 <= lo < hi")
    if isinstance(engine, OpenFormEngine):
        star = min(max(alpha_star_open(pay), lo), hi)
        value = open_payoff(config.with_alpha(star if star > 0 else lo), pay)
        return AlphaOptimum(alpha=star, value=value, at_bound=star in (lo, hi))

    if callable(engine) and not isinstance(engine, (MonteCarloEngine, DpOracleEngine)):
        objective = engine
        cis = None
    else:
        def objective(alpha: float) -> float:
            return payoff(config.with_alpha(alpha), pay, engine).value

        cis = (
            (lambda alpha: payoff(config.with_alpha(alpha), pay, engine).ci_halfwidth)
            if isinstance(engine, MonteCarloEngine)
            else None
        )

    grid = np.linspace(lo, hi, grid_points)
    values = np.array([objective(a) for a in grid])
    best = int(np.argmax(values))

    overlap: Tuple[float, ...] = ()
    if cis is not None:
        half = np.array([cis(a) for a in grid])
        floor_best = values[best] - half[best]
        overlap = tuple(
            float(a) for a, v, h in zip(grid, values, half) if v + h >= floor_best
        )

    if best in (0, grid_points - 1):
        return AlphaOptimum(
            alpha=float(grid[best]), value=float(values[best]),
            at_bound=True, ci_overlap=overlap,
        )

    a, b = float(grid[best - 1]), float(grid[best + 1])
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = objective(x1), objective(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = objective(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = objective(x2)
    star = x1 if f1 >= f2 else x2
    return AlphaOptimum(
        alpha=float(star), value=float(max(f1, f2)),
        at_bound=False, ci_overlap=overlap,
    )


@dataclass(frozen=True)
class PayoffSurface:
    """Payoff estimates over an (attraction factor, capacity) grid.

    ``value[i, j]`` and ``ci[i, j]`` belong to ``alpha_grid[i]`` and
    ``m_grid[j]``.  ``argmax`` carries the best cell with ties resolved to
    the smallest factor, then the smallest capacity; failed cells are NaN
    and excluded.
    """

    alpha_grid: np.ndarray
    m_grid: np.ndarray
    value: np.ndarray
    ci: np.ndarray
    argmax: Tuple[float, int]
    errors: Tuple[Tuple[int, int, str], ...] = ()

    def rows(self):
        """Cells in stable output order: sorted by alpha, then capacity."""
        for i, alpha in enumerate(self.alpha_grid):
            for j, m in enumerate(self.m_grid):
                yield float(alpha), int(m), float(self.value[i, j]), float(self.ci[i, j])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("alpha,m,payoff,ci_halfwidth\n")
            for alpha, m, val, ci in self.rows():
                fh.write(f"{alpha!r},{m},{val!r},{ci!r}\n")

    def to_json(self, path) -> None:
        records = [
            {"alpha": alpha, "m": m, "payoff": val, "ci_halfwidth": ci}
            for alpha, m, val, ci in self.rows()
        ]
        with open(path, "w") as fh:
            json.dump(records, fh, indent=1, sort_keys=False)
            fh.write("\n")


def _row_seed(master: int, row: int) -> int:
    seq = np.random.SeedSequence(entropy=master, spawn_key=(row,))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def sweep_surface(
    config: PlatformConfig,
    pay: PayoffParams,
    alpha_grid: Sequence[float],
    m_grid: Sequence[int],
    engine: Engine,
    workers: int = 1,
) -> PayoffSurface:
    """Payoff over the full grid with common random numbers per capacity row.

    Every capacity derives one child seed from the engine's master seed, and
    all attraction factors at that capacity reuse it, so comparisons along
    the factor axis are sharpened.  Cell failures are recorded in-place (NaN)
    and excluded from the argmax; more than 10% failures raise.
    """
    alphas = np.asarray(list(alpha_grid), dtype=np.float64)
    ms = np.asarray(list(m_grid), dtype=np.int64)
    if alphas.size == 0 or ms.size == 0:
        raise DomainError("grids must be nonempty")
    if np.any(np.diff(alphas) <= 0) or np.any(np.diff(ms) <= 0):
        raise DomainError("grids must be strictly ascending")

    value = np.full((alphas.size, ms.size), np.nan)
    ci = np.zeros((alphas.size, ms.size))
    errors = []

    if isinstance(engine, MonteCarloEngine):
        master = _as_seed(engine.seed).master_seed
        row_engines = [
            engine.with_seed(RunSeed(_row_seed(master, j))) for j in range(ms.size)
        ]
    else:
        row_engines = [engine] * ms.size

    def run_cell(cell):
        i, j = cell
        cfg = config.with_alpha(float(alphas[i])).with_capacity(int(ms[j]))
        return i, j, payoff(cfg, pay, row_engines[j])

    cells = [(i, j) for i in range(alphas.size) for j in range(ms.size)]
    results = []
    if workers <= 1:
        for cell in cells:
            try:
                results.append(run_cell(cell))
            except Exception as exc:  # noqa: BLE001 - poisoned cell, recorded
                errors.append((cell[0], cell[1], str(exc)))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(run_cell, cell): cell for cell in cells}
            for future, cell in futures.items():
                try:
                    results.append(future.result())
                except Exception as exc:  # noqa: BLE001
                    errors.append((cell[0], cell[1], str(exc)))

    for i, j, est in results:
        value[i, j] = est.value
        ci[i, j] = est.ci_halfwidth

    if len(errors) > 0.10 * len(cells):
        raise SweepError(f"{len(errors)} of {len(cells)} cells failed: {errors[:3]}")

    best: Optional[Tuple[float, int]] = None
    best_value = -np.inf
    for i in range(alphas.size):
        for j in range(ms.size):
            v = value[i, j]
            if not np.isnan(v) and v > best_value:
                best_value = v
                best = (float(alphas[i]), int(ms[j]))
    if best is None:
        raise SweepError("every cell failed")
    errors.sort()
    return PayoffSurface(
        alpha_grid=alphas, m_grid=ms, value=value, ci=ci,
        argmax=best, errors=tuple(errors),
    )
