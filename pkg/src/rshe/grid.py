"""Uniform grid on the circle S = (-1/2, 1/2] and real fields living on it.

The N grid points are x_j = j/N for j in {-N/2+1, ..., N/2}, stored in FFT
order: array index i holds the value at x = i/N for i <= N/2 and at
x = (i-N)/N beyond.  The reflection j <-> -j is then index i <-> N-i, the
privileged point x = 0 sits at index 0, and the unpaired point x = 1/2
(index N/2) is its own fixed point.  Integrals over the circle use the
uniform quadrature weight 1/N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidParameterError

SQRT2 = float(np.sqrt(2.0))


@dataclass(frozen=True)
class GridSpec:
    """N-point uniform grid of the circle, N even and at least 8."""

    n_points: int

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 8 or n % 2 != 0:
            raise InvalidParameterError(
                f"n_points must be an even integer >= 8, got {n!r}"
            )
        object.__setattr__(self, "n_points", int(n))

    @property
    def n_modes(self) -> int:
        """Number of retained cosine modes, m = 0 ... N/2."""
        return self.n_points // 2 + 1

    def coordinates(self) -> np.ndarray:
        """Grid coordinates x_j in array (FFT) order."""
        n = self.n_points
        j = np.arange(n)
        j = np.where(j <= n // 2, j, j - n)
        return j / n


@dataclass(frozen=True)
class GridField:
    """Real values on a GridSpec; immutable after construction."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.shape != (self.grid.n_points,):
            raise InvalidInputError(
                f"values must have shape ({self.grid.n_points},), got {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("field values must all be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def constant_field(grid: GridSpec, value: float) -> GridField:
    return GridField(grid, np.full(grid.n_points, float(value)))


def mirror_values(values: np.ndarray) -> np.ndarray:
    """Values of x -> f(-x): index i -> (N - i) mod N."""
    out = np.empty_like(values)
    out[..., 0] = values[..., 0]
    out[..., 1:] = values[..., :0:-1]
    return out


def mirror_half(half: np.ndarray) -> np.ndarray:
    """Assemble a bit-exactly symmetric field from values at j = 0 ... N/2."""
    n = 2 * (half.shape[-1] - 1)
    out = np.empty(half.shape[:-1] + (n,), dtype=half.dtype)
    out[..., : n // 2 + 1] = half
    out[..., n // 2 + 1 :] = half[..., -2:0:-1]
    return out


def symmetry_defect(f: GridField) -> float:
    """Largest pointwise gap |f(x) - f(-x)| over the grid."""
    v = f.values
    return float(np.max(np.abs(v - mirror_values(v))))


def symmetrize(f: GridField) -> GridField:
    """Orthogonal projection onto symmetric fields (pairwise averaging)."""
    return GridField(f.grid, symmetrize_values(f.values))


def symmetrize_values(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + mirror_values(values))


def sample_cosine(grid: GridSpec, m: int, amplitude: float = 1.0) -> GridField:
    """Samples of the m-th orthonormal cosine basis function e_m.

    e_0 = 1 and e_m(x) = sqrt(2) cos(2 pi m x) for 0 < m < N/2.  At the
    Nyquist rank m = N/2 the discrete quadrature of 2 cos^2(pi N x) is 2,
    so the discretely orthonormal representative drops the sqrt(2).
    Construction mirrors the half-circle samples, so the result is
    bit-exactly symmetric.
    """
    n = grid.n_points
    if not 0 <= m <= n // 2:
        raise InvalidParameterError(f"mode index must lie in [0, {n // 2}], got {m}")
    j = np.arange(n // 2 + 1)
    if m == 0:
        half = np.ones(n // 2 + 1)
    elif m == n // 2:
        half = np.cos(np.pi * j)
    else:
        half = SQRT2 * np.cos(2.0 * np.pi * m * j / n)
    return GridField(grid, amplitude * mirror_half(half))


# --- quadrature (uniform weight 1/N) ---------------------------------------


def mean_value(f: GridField) -> float:
    """The zero Fourier mode, i.e. the integral of f over the circle."""
    return float(np.mean(f.values))


def inner(f: GridField, g: GridField) -> float:
    if f.grid != g.grid:
        raise InvalidInputError("fields live on different grids")
    return float(np.dot(f.values, g.values) / f.grid.n_points)


def norm_l2_sq(f: GridField) -> float:
    return float(np.dot(f.values, f.values) / f.grid.n_points)


def norm_l2(f: GridField) -> float:
    return float(np.sqrt(norm_l2_sq(f)))


def norm_lp(f: GridField, p) -> float:
    v = f.values
    if p == np.inf or p == "inf":
        return float(np.max(np.abs(v)))
    if p == 1:
        return float(np.mean(np.abs(v)))
    if p == 2:
        return norm_l2(f)
    return float(np.mean(np.abs(v) ** p) ** (1.0 / p))
