"""Dictionary between admissible quantile fields and probability laws on R.

An admissible field u is the quantile function of the measure
mu = Leb o u^{-1}; the map is an isometry between the admissible cone with
the L2 norm and the 2-Wasserstein space.  Quantiles are read off the right
half-circle through the chart q(p) = u((1-p)/2), so the decreasing direction
in x is the increasing direction in p and q(1) = u(0) is the maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidParameterError
from .grid import GridField, GridSpec
from .rearrange import is_admissible, rearrange, rearrange_values


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Finite sample of a law on R, kept ascending-sorted."""

    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=np.float64), kind="stable")
        if s.ndim != 1 or s.size == 0:
            raise InvalidInputError("samples must be a non-empty 1-d vector")
        if not np.all(np.isfinite(s)):
            raise InvalidInputError("samples must be finite")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)


def quantile_of(u: GridField, p: float) -> float:
    """Quantile q(p) of the measure represented by the admissible field u."""
    if not 0.0 < p <= 1.0:
        raise InvalidParameterError(f"p must lie in (0, 1], got {p}")
    if not is_admissible(u):
        raise InvalidInputError("field is not admissible; rearrange it first")
    n = u.grid.n_points
    j = int(round(n * (1.0 - p) / 2.0))
    return float(u.values[min(j, n // 2)])


def samples_to_quantile(m: EmpiricalMeasure, grid: GridSpec) -> GridField:
    """Admissible field whose values are the empirical quantiles at the
    grid-cell midpoint levels (k + 1/2)/N."""
    if m.samples.size < 2:
        raise InvalidInputError("at least 2 samples are required")
    levels = (np.arange(grid.n_points) + 0.5) / grid.n_points
    q = np.quantile(m.samples, levels, method="inverted_cdf")
    return GridField(grid, rearrange_values(np.asarray(q, dtype=np.float64)))


def stratified_samples(u: GridField, k: int) -> EmpiricalMeasure:
    """Deterministic size-k sample of the law of u at midpoint levels."""
    if k < 2:
        raise InvalidParameterError(f"sample count must be >= 2, got {k}")
    levels = (np.arange(k) + 0.5) / k
    vals = np.array([quantile_of(u, float(p)) for p in levels])
    return EmpiricalMeasure(vals)


def w2(u: GridField, v: GridField) -> float:
    """2-Wasserstein distance between the laws of u and v: ||u* - v*||_2."""
    if u.grid != v.grid:
        raise InvalidInputError("fields live on different grids")
    us, _ = rearrange(u)
    vs, _ = rearrange(v)
    d = us.values - vs.values
    return float(np.sqrt(np.dot(d, d) / u.grid.n_points))


def sorted_sample_w2(a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """Plain order-statistics W2 estimator for equal-size samples."""
    if a.samples.size != b.samples.size:
        raise InvalidInputError("sorted-sample W2 needs equal sample sizes")
    d = a.samples - b.samples
    return float(np.sqrt(np.mean(d * d)))


def normal_quantile_field(grid: GridSpec, mean: float = 0.0, std: float = 1.0) -> GridField:
    """Admissible quantile field of the N(mean, std^2) law."""
    if std <= 0.0:
        raise InvalidParameterError(f"std must be > 0, got {std}")
    levels = (np.arange(grid.n_points) + 0.5) / grid.n_points
    q = np.array([_standard_normal_quantile(p) for p in levels])
    return GridField(grid, rearrange_values(mean + std * q))


def _standard_normal_quantile(p: float) -> float:
    """Inverse standard normal CDF by Newton iteration on erf (to ~1e-14)."""
    # starting point: logistic-style approximation, then Newton on
    # Phi(x) - p with Phi'(x) the normal density
    x = math.sqrt(2.0) * _erfinv_seed(2.0 * p - 1.0)
    for _ in range(60):
        cdf = 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        if pdf == 0.0:
            break
        dx = (cdf - p) / pdf
        x -= dx
        if abs(dx) < 1e-14 * max(1.0, abs(x)):
            break
    return x


def _erfinv_seed(y: float) -> float:
    # Winitzki's approximation, adequate as a Newton starting point
    a = 0.147
    ln = math.log(max(1.0 - y * y, 1e-300))
    term = 2.0 / (math.pi * a) + ln / 2.0
    return math.copysign(math.sqrt(math.sqrt(term * term - ln / a) - term), y)


def read_samples_csv(path) -> EmpiricalMeasure:
    """Single-column CSV of sample values."""
    data = np.loadtxt(path, delimiter=",", ndmin=1)
    if data.ndim != 1:
        raise InvalidInputError("sample CSV must contain a single column")
    return EmpiricalMeasure(data)


def write_samples_csv(path, m: EmpiricalMeasure):
    with open(path, "w") as fh:
        for v in m.samples:
            fh.write(repr(float(v)) + "\n")
