"""Truncated bivariate power series and the threshold-transform operator pair.

The transform D maps a doubly indexed sequence f(x, y) to
(1-u)(1-v) * sum f(x,y) u^x v^y; its inverse recovers f(m, n) as the partial
sum of the series coefficients up to (m, n).  All series arithmetic is done
on dense coefficient grids hard-truncated at fixed degree bounds, which is
exact for every coefficient the inverse ever reads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal, stats

from .exceptions import DomainError, ExtractionError, SingularSeriesError
from .model import DelayDistribution, RatePair

_KERNEL_1M_U_1M_V = np.array([[1.0, -1.0], [-1.0, 1.0]])


class TruncatedSeries2:
    """Dense bivariate power series truncated at degree bounds (max_u, max_v).

    coeff[i, j] is the coefficient of u^i v^j.  Arithmetic never reads or
    writes outside the bounds.
    """

    __slots__ = ("coeff",)

    def __init__(self, coeff):
        arr = np.asarray(coeff)
        if arr.ndim != 2:
            raise DomainError("coefficient grid must be 2-D")
        if not np.iscomplexobj(arr):
            arr = arr.astype(np.float64, copy=True)
        else:
            arr = arr.astype(np.complex128, copy=True)
        self.coeff = arr

    @property
    def max_u(self) -> int:
        return self.coeff.shape[0] - 1

    @property
    def max_v(self) -> int:
        return self.coeff.shape[1] - 1

    @property
    def bounds(self):
        return (self.max_u, self.max_v)

    @classmethod
    def zeros(cls, max_u: int, max_v: int, complex_: bool = False):
        dtype = np.complex128 if complex_ else np.float64
        return cls(np.zeros((max_u + 1, max_v + 1), dtype=dtype))

    @classmethod
    def unit(cls, max_u: int, max_v: int, complex_: bool = False):
        s = cls.zeros(max_u, max_v, complex_)
        s.coeff[0, 0] = 1.0
        return s

    def copy(self) -> "TruncatedSeries2":
        return TruncatedSeries2(self.coeff)

    def _check_bounds(self, other: "TruncatedSeries2"):
        if self.bounds != other.bounds:
            raise DomainError(
                f"degree bounds mismatch: {self.bounds} vs {other.bounds}"
            )

    def __add__(self, other):
        if isinstance(other, TruncatedSeries2):
            self._check_bounds(other)
            return TruncatedSeries2(self.coeff + other.coeff)
        out = self.copy()
        out.coeff[0, 0] += other
        return out

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, TruncatedSeries2):
            self._check_bounds(other)
            return TruncatedSeries2(self.coeff - other.coeff)
        out = self.copy()
        out.coeff[0, 0] -= other
        return out

    def __rsub__(self, other):
        out = TruncatedSeries2(-self.coeff)
        out.coeff[0, 0] += other
        return out

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries2):
            return series_mul(self, other)
        return TruncatedSeries2(self.coeff * other)

    __rmul__ = __mul__

    def __neg__(self):
        return TruncatedSeries2(-self.coeff)

    def __repr__(self):
        return f"TruncatedSeries2(bounds={self.bounds})"


def series_mul(a: TruncatedSeries2, b: TruncatedSeries2) -> TruncatedSeries2:
    """Coefficient convolution of two series, truncated at the common bounds."""
    a._check_bounds(b)
    full = signal.convolve(a.coeff, b.coeff, method="auto")
    return TruncatedSeries2(full[: a.max_u + 1, : a.max_v + 1])


def series_reciprocal(a: TruncatedSeries2) -> TruncatedSeries2:
    """Series r with a * r = 1 up to truncation.

    Solved by Newton iteration r <- r(2 - a r); the lowest erroneous degree
    doubles each step, so ceil(log2(total degree)) + 1 steps suffice.
    """
    c0 = a.coeff[0, 0]
    if abs(c0) <= 1e-9:
        raise SingularSeriesError(
            f"cannot invert series with constant term {c0!r}"
        )
    r = TruncatedSeries2.zeros(a.max_u, a.max_v, complex_=np.iscomplexobj(a.coeff))
    r.coeff[0, 0] = 1.0 / c0
    total_degree = a.max_u + a.max_v
    steps = max(1, int(np.ceil(np.log2(total_degree + 1))) + 1)
    for _ in range(steps):
        r = series_mul(r, 2.0 - series_mul(a, r))
    return r


def d_forward(f, u: float, v: float, tail: str = "zero") -> float:
    """Value of the threshold transform (1-u)(1-v) * sum f(x,y) u^x v^y.

    ``f`` is a 2-D grid of values on [0, X] x [0, Y].  With ``tail="zero"``
    the sequence vanishes beyond the grid; with ``tail="extend"`` the last
    row/column/corner repeat forever (indicator-style sequences) and the
    geometric tails are summed in closed form.
    """
    if abs(u) >= 1.0 or abs(v) >= 1.0:
        raise DomainError("d_forward requires |u| < 1 and |v| < 1")
    grid = np.asarray(f, dtype=np.float64)
    if grid.ndim != 2:
        raise DomainError("f must be a 2-D grid")
    nx, ny = grid.shape
    xs = u ** np.arange(nx)
    ys = v ** np.arange(ny)
    if tail == "zero":
        return float((1.0 - u) * (1.0 - v) * xs @ grid @ ys)
    if tail != "extend":
        raise DomainError(f"unknown tail mode {tail!r}")
    # interior + two geometric edge strips + geometric corner
    total = xs[: nx - 1] @ grid[: nx - 1, : ny - 1] @ ys[: ny - 1]
    total += (xs[: nx - 1] @ grid[: nx - 1, ny - 1]) * ys[ny - 1] / (1.0 - v)
    total += (grid[nx - 1, : ny - 1] @ ys[: ny - 1]) * xs[nx - 1] / (1.0 - u)
    total += grid[nx - 1, ny - 1] * xs[nx - 1] * ys[ny - 1] / ((1.0 - u) * (1.0 - v))
    return float((1.0 - u) * (1.0 - v) * total)


def d_transform_series(f) -> TruncatedSeries2:
    """Threshold transform of a finitely supported sequence, as a series.

    Multiplying the coefficient grid by (1-u)(1-v) raises the degree bounds
    by one in each variable; the result round-trips exactly through
    ``d_inverse``.
    """
    grid = np.asarray(f, dtype=np.float64)
    if grid.ndim != 2:
        raise DomainError("f must be a 2-D grid")
    full = signal.convolve(grid, _KERNEL_1M_U_1M_V, method="direct")
    return TruncatedSeries2(full)


def d_inverse(a: TruncatedSeries2, m: int, n: int):
    """(m, n) coefficient of a(u, v) / ((1-u)(1-v)): the partial coefficient sum.

    Negative indices return 0; indices beyond the degree bounds are rejected
    because the truncated grid cannot represent them.
    """
    if m < 0 or n < 0:
        return 0.0
    if m > a.max_u or n > a.max_v:
        raise DomainError(
            f"d_inverse index ({m}, {n}) outside bounds {a.bounds}"
        )
    total = a.coeff[: m + 1, : n + 1].sum()
    return complex(total) if np.iscomplexobj(a.coeff) else float(total)


def _geometric_joint_grid(mass_a, mass_b, max_u: int, max_v: int, dtype):
    """Coefficient grid of 1 / (1 + mass_a(1-z) + mass_b(1-g)).

    Built by the exact recurrence S*p[i,j] = mass_a*p[i-1,j] + mass_b*p[i,j-1],
    which is stable and handles zero masses.  The row recurrence is a
    first-order linear filter, so each row is one C-level ``lfilter`` call;
    iteration runs over the shorter axis.
    """
    if max_u > max_v:
        return _geometric_joint_grid(mass_b, mass_a, max_v, max_u, dtype).T
    s = 1.0 + mass_a + mass_b
    grid = np.zeros((max_u + 1, max_v + 1), dtype=np.float64)
    driver = np.zeros(max_v + 1)
    driver[0] = 1.0 / s
    filt_b = [1.0, -mass_b / s]
    grid[0] = signal.lfilter([1.0], filt_b, driver)
    for i in range(1, max_u + 1):
        grid[i] = signal.lfilter([mass_a / s], filt_b, grid[i - 1])
    return grid.astype(dtype, copy=False)


def _poisson_joint_grid(mass_a, mass_b, max_u: int, max_v: int, dtype):
    """Independent Poisson product grid for deterministic delays."""
    pa = stats.poisson.pmf(np.arange(max_u + 1), mass_a) if mass_a > 0 else None
    pb = stats.poisson.pmf(np.arange(max_v + 1), mass_b) if mass_b > 0 else None
    if pa is None:
        pa = np.zeros(max_u + 1)
        pa[0] = 1.0
    if pb is None:
        pb = np.zeros(max_v + 1)
        pb[0] = 1.0
    return np.outer(pa, pb).astype(dtype)


def expand_gamma_series(
    rates: RatePair,
    dist: DelayDistribution,
    z_scale,
    g_scale,
    bounds,
) -> TruncatedSeries2:
    """Expansion of the joint increment transform gamma(z_scale*u, g_scale*v).

    Coefficient (i, j) equals P{X = i, Y = j} * z_scale^i * g_scale^j, where
    (X, Y) are the per-interval counts of the two flows.  Scales must have
    modulus at most 1 (complex scales are used for coefficient extraction).
    """
    if abs(z_scale) > 1.0 + 1e-12 or abs(g_scale) > 1.0 + 1e-12:
        raise DomainError("scales must lie in the closed unit disk")
    max_u, max_v = bounds
    la, lb = rates
    if la < 0 or lb < 0:
        raise DomainError("rates must be nonnegative")
    complex_ = np.iscomplexobj(np.asarray(z_scale)) or np.iscomplexobj(np.asarray(g_scale))
    dtype = np.complex128 if complex_ else np.float64
    mass_a = la * dist.mean
    mass_b = lb * dist.mean
    if dist.kind == "exponential":
        grid = _geometric_joint_grid(mass_a, mass_b, max_u, max_v, dtype)
    else:
        grid = _poisson_joint_grid(mass_a, mass_b, max_u, max_v, dtype)
    zp = np.power(np.asarray(z_scale, dtype=dtype), np.arange(max_u + 1))
    gp = np.power(np.asarray(g_scale, dtype=dtype), np.arange(max_v + 1))
    return TruncatedSeries2(grid * np.outer(zp, gp))


def gamma_series_fixed_z(
    rates: RatePair,
    dist: DelayDistribution,
    z_value,
    g_scale,
    bounds,
) -> TruncatedSeries2:
    """Expansion of gamma(z_value, g_scale*v): first argument held constant.

    The sum over the customer index is taken in closed form, so the result is
    a series in v alone (all coefficients with positive u-degree vanish).
    """
    if abs(z_value) > 1.0 + 1e-12 or abs(g_scale) > 1.0 + 1e-12:
        raise DomainError("arguments must lie in the closed unit disk")
    max_u, max_v = bounds
    la, lb = rates
    complex_ = np.iscomplexobj(np.asarray(z_value)) or np.iscomplexobj(np.asarray(g_scale))
    dtype = np.complex128 if complex_ else np.float64
    mass_a = la * dist.mean
    mass_b = lb * dist.mean
    out = TruncatedSeries2.zeros(max_u, max_v, complex_=complex_)
    row = np.zeros(max_v + 1, dtype=dtype)
    if dist.kind == "exponential":
        d = 1.0 + mass_a * (1.0 - z_value) + mass_b
        row[0] = 1.0 / d
        for j in range(1, max_v + 1):
            row[j] = row[j - 1] * mass_b * g_scale / d
    else:
        prefactor = np.exp(-mass_a * (1.0 - z_value)) * np.exp(-mass_b)
        row[0] = prefactor
        for j in range(1, max_v + 1):
            row[j] = row[j - 1] * mass_b * g_scale / j
    out.coeff[0, :] = row
    return out


@dataclass(frozen=True)
class PgfArray:
    """Finite (sub-)probability mass sequence p_0..p_K with its total mass."""

    mass: np.ndarray
    total: float

    @classmethod
    def from_values(cls, values) -> "PgfArray":
        arr = np.asarray(values, dtype=np.float64).copy()
        if arr.ndim != 1:
            raise DomainError("mass sequence must be 1-D")
        if arr.size and arr.min() < -1e-12:
            raise DomainError(f"negative mass {arr.min()} below tolerance")
        arr[arr < 0.0] = 0.0
        total = float(arr.sum())
        if total > 1.0 + 1e-9:
            raise DomainError(f"total mass {total} exceeds 1")
        return cls(mass=arr, total=total)

    def normalized(self) -> "PgfArray":
        """Mass sequence rescaled to total 1, for use as a mixing distribution."""
        if self.total <= 0.0:
            raise DomainError("cannot normalize a zero-mass sequence")
        return PgfArray(mass=self.mass / self.total, total=1.0)

    def __len__(self):
        return self.mass.size

    def __getitem__(self, k):
        return float(self.mass[k])


def pgf_extract(pgf, k: int, oversample: int = 4) -> PgfArray:
    """First k+1 power-series coefficients of a PGF via unit-circle sampling.

    The PGF is sampled at ``oversample * (k+1)`` equally spaced points on the
    unit circle and inverted with a discrete Fourier transform.  Aliasing of
    a non-polynomial tail is controlled by the oversampling factor; residual
    imaginary parts above 1e-6 raise, smaller ones are clamped.
    """
    if k < 0:
        raise DomainError("k must be nonnegative")
    n = max(oversample, 1) * (k + 1)
    points = np.exp(2j * np.pi * np.arange(n) / n)
    values = np.array([pgf(p) for p in points], dtype=np.complex128)
    coeffs = np.fft.fft(values) / n
    head = coeffs[: k + 1]
    worst = float(np.abs(head.imag).max()) if head.size else 0.0
    if worst > 1e-6:
        raise ExtractionError(
            f"imaginary residual {worst:.3e} exceeds 1e-6; raise k to "
            "suppress tail aliasing"
        )
    return PgfArray.from_values(head.real)
