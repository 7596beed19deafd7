"""Exact forward dynamic program over the embedded increment chain.

The observation epochs form a Markov chain on the pair of cumulative counts.
For static coupling the per-epoch increment law is a fixed bivariate pmf;
under attraction coupling it depends on the current supplier count only, so
the chain stays exactly computable with one kernel per supplier level.  Two
passes are provided:

* an exit-split pass on the capacity-capped lattice, giving the customer-
  first probability and the supplier-count snapshot distributions, and
* a payoff pass that keeps the supplier count uncapped (collapsed to mass
  and first-moment aggregates above the capacity, which the payoff terms
  never resolve further).

Both passes accumulate the pre-exit occupancy measure and evaluate every
exit statistic from it in a single closed-form sweep, so runtime is a few
hundred small convolutions.  Probabilities are exact up to the stated
truncation budgets (increment tails below 1e-13, survivor drain to 1e-16).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal, stats

from .exceptions import DomainError, PrecisionError
from .model import PlatformConfig, attraction_rate
from .series import expand_gamma_series

_MAX_KERNEL = 4096
_DRAIN_EPS = 1e-16
_MAX_EPOCHS = 200_000
_MAX_CAPACITY = 12


def _marginal_bound(mass: float, kind: str, tail: float) -> int:
    """Index k with P{count > k} < tail for one marginal."""
    if mass <= 0.0:
        return 0
    if kind == "exponential":
        ratio = mass / (1.0 + mass)
        return max(8, int(np.ceil(np.log(tail) / np.log(ratio))))
    return max(8, int(stats.poisson.isf(tail, mass)) + 2)


def increment_grid(rates, dist, tail: float = 1e-13) -> np.ndarray:
    """Joint increment pmf on a grid large enough that the missing tail < tail.

    The two axes are sized independently from the marginal tails (the
    customer axis can need thousands of states under strong attraction while
    the supplier axis stays small).
    """
    la, lb = rates
    kx = _marginal_bound(la * dist.mean, dist.kind, tail / 2.0)
    ky = _marginal_bound(lb * dist.mean, dist.kind, tail / 2.0)
    while True:
        if max(kx, ky) > _MAX_KERNEL:
            raise PrecisionError(
                f"increment tail budget {tail:.0e} needs more than "
                f"{_MAX_KERNEL} states per axis"
            )
        grid = expand_gamma_series(rates, dist, 1.0, 1.0, (kx, ky)).coeff
        if 1.0 - grid.sum() < tail:
            return grid
        kx = int(kx * 1.5) + 4
        ky = int(ky * 1.5) + 4


def _poisson_vector(mean: float, tail: float = 1e-13) -> np.ndarray:
    if mean <= 0.0:
        return np.array([1.0])
    size = 32
    while True:
        pmf = stats.poisson.pmf(np.arange(size + 1), mean)
        if 1.0 - pmf.sum() < tail:
            return pmf
        if size >= _MAX_KERNEL:
            raise PrecisionError("poisson tail budget exceeded")
        size *= 2


def initial_grid(config: PlatformConfig, tail: float = 1e-13) -> np.ndarray:
    """Joint pmf of the initial batch (customer count, supplier count)."""
    if config.coupling == "static":
        return increment_grid(config.rates.initial, config.tau0, tail)
    # attraction: customer batch at the mean initial delay, suppliers fixed
    pa = _poisson_vector(config.rates.lambda_a0 * config.tau0.mean, tail)
    b0 = int(config.b0)
    grid = np.zeros((pa.size, b0 + 1))
    grid[:, b0] = pa
    return grid


def _epoch_kernels(config: PlatformConfig, m: int, tail: float):
    """Per-supplier-level increment kernels for levels 0..m (m = saturated)."""
    if config.coupling == "static":
        shared = increment_grid(config.rates.main, config.delta, tail)
        return [shared] * (m + 1)
    kernels = []
    for b in range(m + 1):
        rate_a = attraction_rate(config, b)
        kernels.append(increment_grid((rate_a, config.rates.lambda_b), config.delta, tail))
    return kernels


def _resolve(config: PlatformConfig, m) -> PlatformConfig:
    if m is not None and int(m) != config.capacity:
        config = config.with_capacity(int(m))
    if config.capacity > _MAX_CAPACITY:
        raise DomainError(
            f"dynamic program limited to capacity <= {_MAX_CAPACITY} "
            f"(state space grows quadratically); got {config.capacity}"
        )
    return config


@dataclass(frozen=True)
class ExitLaw:
    """Exact exit split and supplier snapshot laws at a given capacity.

    All pmf arrays are defective: they carry the mass of the customer-first
    event only.  ``b_prev_pmf`` is the supplier count one epoch before the
    customer exit, ``b_at_exit_pmf`` the count at the exit epoch, and
    ``b_nu_prev_pmf`` the count one epoch before the supplier side would
    itself reach the capacity (the supplier track continued past the exit).
    """

    capacity: int
    p_mu_first: float
    p_nu_first: float
    p_tie: float
    b_prev_pmf: np.ndarray
    b_at_exit_pmf: np.ndarray
    b_nu_prev_pmf: np.ndarray
    a_exit_pmf: np.ndarray
    mean_a_exit_given_mu_first: float
    epochs: int

    @property
    def outcome_total(self) -> float:
        return self.p_mu_first + self.p_nu_first + self.p_tie


class _CappedExitStats:
    """Accumulates exit statistics from pre-exit occupancy measures."""

    def __init__(self, m: int, a_support: int):
        self.m = m
        self.p_mu_first = 0.0
        self.p_nu_first = 0.0
        self.p_tie = 0.0
        self.b_prev = np.zeros(m)
        self.b_at_exit = np.zeros(m)
        self.a_exit = np.zeros(a_support)

    def add(self, occupancy: np.ndarray, kernel_for_b) -> None:
        """Fold in exits generated by ``occupancy`` (a < m, b < m) states.

        From state (a, b), an increment (x, y) crosses the customer side when
        x >= m - a and the supplier side when y >= m - b, so the kernel splits
        into four rectangles: customer-first exit, tie, supplier-first exit,
        and survival.
        """
        m = self.m
        for b in range(m):
            col = occupancy[:, b]
            if not col.any():
                continue
            kern = kernel_for_b(b)
            kx, ky = kern.shape
            # gx[x0, y] = sum_{x >= x0} kern[x, y]
            gx = np.zeros((kx + 1, ky))
            gx[:kx] = np.cumsum(kern[::-1], axis=0)[::-1]
            y_keep = m - b
            ycap = min(y_keep, ky)
            y_cross_total = kern[:, ycap:].sum()
            for a in range(m):
                w = col[a]
                if w == 0.0:
                    continue
                x0 = m - a
                if x0 > kx:
                    self.p_nu_first += w * y_cross_total
                    continue
                tail_row = gx[x0]
                head = tail_row[:ycap]
                mass = head.sum()
                tie = tail_row[ycap:].sum()
                self.p_mu_first += w * mass
                self.b_prev[b] += w * mass
                self.b_at_exit[b : b + head.size] += w * head
                self.p_tie += w * tie
                self.p_nu_first += w * (y_cross_total - tie)
                if x0 < kx:
                    self.a_exit[a + x0 : a + kx] += w * kern[x0:, :ycap].sum(axis=1)


def dp_oracle(config: PlatformConfig, m=None, tail: float = 1e-13) -> ExitLaw:
    """Exact exit law on the capped lattice; the arbiter for the series route."""
    config = _resolve(config, m)
    m = config.capacity
    kernels = _epoch_kernels(config, m, tail)
    init = initial_grid(config, tail)

    max_kx = max(max(k.shape[0] for k in kernels), init.shape[0])
    stats_acc = _CappedExitStats(m, m + max_kx + 1)

    # epoch 0: the virtual pre-state is a unit mass at (0, 0)
    delta = np.zeros((m, m))
    delta[0, 0] = 1.0
    stats_acc.add(delta, lambda b: init)

    survivor = np.zeros((m, m))
    sub = init[: m, : m]
    survivor[: sub.shape[0], : sub.shape[1]] = sub

    occupancy = np.zeros((m, m))
    epochs = 0
    while survivor.sum() > _DRAIN_EPS:
        occupancy += survivor
        survivor = _step_capped(survivor, kernels, m)
        epochs += 1
        if epochs > _MAX_EPOCHS:
            raise PrecisionError("survivor mass failed to drain")

    stats_acc.add(occupancy, lambda b: kernels[b])

    b_nu_prev = _continue_supplier_track(stats_acc.b_at_exit, kernels[0], m)
    mu_mass = stats_acc.p_mu_first
    mean_a = (
        float(np.arange(stats_acc.a_exit.size) @ stats_acc.a_exit) / mu_mass
        if mu_mass > 0.0
        else float("nan")
    )
    return ExitLaw(
        capacity=m,
        p_mu_first=float(mu_mass),
        p_nu_first=float(stats_acc.p_nu_first),
        p_tie=float(stats_acc.p_tie),
        b_prev_pmf=stats_acc.b_prev,
        b_at_exit_pmf=stats_acc.b_at_exit,
        b_nu_prev_pmf=b_nu_prev,
        a_exit_pmf=stats_acc.a_exit,
        mean_a_exit_given_mu_first=mean_a,
        epochs=epochs,
    )


def _step_capped(survivor: np.ndarray, kernels, m: int) -> np.ndarray:
    out = np.zeros((m, m))
    if kernels[0] is kernels[-1]:
        full = signal.convolve(survivor, kernels[0], method="auto")
        np.copyto(out, full[:m, :m])
        return out
    for b in range(m):
        col = survivor[:, b]
        if not col.any():
            continue
        full = signal.convolve(col[:, None], kernels[b], method="auto")
        keep_y = min(full.shape[1], m - b)
        out[:, b : b + keep_y] += full[:m, :keep_y]
    return out


def _continue_supplier_track(b_at_exit: np.ndarray, kernel: np.ndarray, m: int) -> np.ndarray:
    """Law of the supplier count one epoch before it reaches the capacity.

    The supplier flow is autonomous, so after the customer exit the count
    evolves by the marginal increment pmf until it crosses.  The occupancy
    of each sub-capacity level has a triangular closed form.
    """
    p_y = kernel.sum(axis=0)
    stay = p_y[0]
    if stay >= 1.0 - 1e-15:
        return np.zeros(m)
    occupancy = np.zeros(m)
    for c in range(m):
        inflow = b_at_exit[c]
        for d in range(c):
            if occupancy[d] and c - d < p_y.size:
                inflow += occupancy[d] * p_y[c - d]
        occupancy[c] = inflow / (1.0 - stay)
    head = np.cumsum(p_y)
    out = np.zeros(m)
    for c in range(m):
        need = m - c
        below = head[need - 1] if need - 1 < head.size else 1.0
        out[c] = occupancy[c] * (1.0 - below)
    return out


@dataclass(frozen=True)
class PayoffTerms:
    """Exact expectations entering the capacity payoff."""

    capacity: int
    mean_a_exit: float
    mean_b_at_exit: float
    mean_b_under: float
    p_under: float
    p_over: float
    mean_a_over: float
    epochs: int

    def payoff(self, c0: float, c1: float) -> float:
        m = float(self.capacity)
        return (
            c0 * self.mean_a_exit
            - c1 * self.mean_b_under
            - c1 * (m * self.p_over - self.mean_a_over)
        )


def dp_payoff_terms(config: PlatformConfig, m=None, tail: float = 1e-13) -> PayoffTerms:
    """Exact payoff expectations; the supplier count is not capped."""
    config = _resolve(config, m)
    m = config.capacity
    kernels = _epoch_kernels(config, m, tail)
    cap_kernel = kernels[m]
    init = initial_grid(config, tail)

    # occupancy of pre-exit states: per-level rows below the capacity plus
    # zeroth/first moment aggregates of the supplier count at or above it
    occ_rows = np.zeros((m, m))
    occ_agg_mass = np.zeros(m)
    occ_agg_bmass = np.zeros(m)

    rows = np.zeros((m, m))
    agg_mass = np.zeros(m)
    agg_bmass = np.zeros(m)

    # seed with the epoch-0 survivors (customer batch below capacity)
    ax = min(init.shape[0], m)
    keep_y = min(init.shape[1], m)
    rows[:ax, :keep_y] = init[:ax, :keep_y]
    if init.shape[1] > m:
        spill = init[:ax, m:]
        agg_mass[:ax] += spill.sum(axis=1)
        agg_bmass[:ax] += spill @ np.arange(m, init.shape[1], dtype=np.float64)

    terms = _PayoffAccumulator(m)
    # epoch-0 exits come from the virtual (0, 0) state through the batch law
    terms.add_row_occupancy(np.eye(1, m, 0).ravel(), 0, init)

    epochs = 0
    while rows.sum() + agg_mass.sum() > _DRAIN_EPS:
        occ_rows += rows
        occ_agg_mass += agg_mass
        occ_agg_bmass += agg_bmass
        rows, agg_mass, agg_bmass = _step_payoff(
            rows, agg_mass, agg_bmass, kernels, cap_kernel, m
        )
        epochs += 1
        if epochs > _MAX_EPOCHS:
            raise PrecisionError("payoff survivor mass failed to drain")

    for b in range(m):
        terms.add_row_occupancy(occ_rows[:, b], b, kernels[b])
    terms.add_aggregate_occupancy(occ_agg_mass, occ_agg_bmass, cap_kernel)
    return terms.finish(config, epochs)


class _PayoffAccumulator:
    def __init__(self, m: int):
        self.m = m
        self.exit_mass = 0.0
        self.mean_a = 0.0
        self.mean_b = 0.0
        self.p_under = 0.0
        self.mean_b_under = 0.0

    @staticmethod
    def _suffix(values: np.ndarray) -> np.ndarray:
        out = np.zeros(values.size + 1)
        out[:-1] = np.cumsum(values[::-1])[::-1]
        return out

    def add_row_occupancy(self, col: np.ndarray, b: int, kern: np.ndarray) -> None:
        """Exits of occupancy ``col`` (over the customer count) at supplier level b."""
        if not col.any():
            return
        m = self.m
        kx, ky = kern.shape
        p_x = kern.sum(axis=1)
        w_y = kern @ np.arange(ky, dtype=np.float64)  # sum_y y K[x, y]
        sx = self._suffix(p_x)
        wx = self._suffix(p_x * np.arange(kx))
        wy_tail = self._suffix(w_y)
        for a in range(m):
            w = col[a]
            if w == 0.0:
                continue
            x0 = min(m - a, kx)
            exit_mass = sx[x0]
            self.exit_mass += w * exit_mass
            self.mean_a += w * (a * exit_mass + wx[x0])
            self.mean_b += w * (b * exit_mass + wy_tail[x0])
            if b == 0 and m - a < kx:
                # zero prior suppliers and no customer overshoot
                hit = m - a
                self.p_under += w * p_x[hit]
                self.mean_b_under += w * w_y[hit]

    def add_aggregate_occupancy(self, mass: np.ndarray, bmass: np.ndarray, kern) -> None:
        if not mass.any():
            return
        m = self.m
        kx, ky = kern.shape
        p_x = kern.sum(axis=1)
        w_y = kern @ np.arange(ky, dtype=np.float64)
        sx = self._suffix(p_x)
        wx = self._suffix(p_x * np.arange(kx))
        wy_tail = self._suffix(w_y)
        for a in range(m):
            if mass[a] == 0.0 and bmass[a] == 0.0:
                continue
            x0 = min(m - a, kx)
            exit_mass = sx[x0]
            self.exit_mass += mass[a] * exit_mass
            self.mean_a += mass[a] * (a * exit_mass + wx[x0])
            self.mean_b += bmass[a] * exit_mass + mass[a] * wy_tail[x0]

    def finish(self, config: PlatformConfig, epochs: int) -> PayoffTerms:
        p_over = self.exit_mass - self.p_under
        mean_a_over = self.mean_a - self.m * self.p_under
        return PayoffTerms(
            capacity=self.m,
            mean_a_exit=self.mean_a,
            mean_b_at_exit=self.mean_b,
            mean_b_under=self.mean_b_under,
            p_under=self.p_under,
            p_over=p_over,
            mean_a_over=mean_a_over,
            epochs=epochs,
        )


def _step_payoff(rows, agg_mass, agg_bmass, kernels, cap_kernel, m: int):
    new_rows = np.zeros((m, m))
    new_mass = np.zeros(m)
    new_bmass = np.zeros(m)
    for b in range(m):
        col = rows[:, b]
        if not col.any():
            continue
        kern = kernels[b]
        full = signal.convolve(col[:, None], kern, method="auto")[:m]
        keep_y = min(full.shape[1], m - b)
        new_rows[:, b : b + keep_y] += full[:, :keep_y]
        if full.shape[1] > m - b:
            spill = full[:, m - b :]
            new_mass += spill.sum(axis=1)
            levels = np.arange(m - b, full.shape[1], dtype=np.float64) + b
            new_bmass += spill @ levels
    if agg_mass.any():
        p_x = cap_kernel.sum(axis=1)
        w_y = cap_kernel @ np.arange(cap_kernel.shape[1], dtype=np.float64)
        new_mass += np.convolve(agg_mass, p_x)[:m]
        new_bmass += np.convolve(agg_bmass, p_x)[:m]
        new_bmass += np.convolve(agg_mass, w_y)[:m]
    return new_rows, new_mass, new_bmass
