"""Cosine-mode representation of symmetric fields and the exact heat flow.

A symmetric field f decomposes as f = sum_m fhat_m e_m over the discretely
orthonormal cosine basis (see ``grid.sample_cosine``).  The coefficients are
computed by exact quadrature on the grid, which is a type-I discrete cosine
transform realised through a real FFT:

    c_k = sum_j f_j cos(2 pi j k / N)            (rfft of a symmetric field)
    fhat_0 = c_0 / N,   fhat_m = sqrt(2) c_m / N,   fhat_{N/2} = c_{N/2} / N

With these weights Parseval holds exactly: sum_m fhat_m^2 = (1/N) sum_j f_j^2.
The periodic heat semigroup acts diagonally, multiplying mode m by
exp(-4 pi^2 m^2 kappa t).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, SymmetryError
from .grid import GridField, GridSpec, SQRT2, mirror_half, symmetry_defect

SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class SpectralField:
    """Cosine-mode coefficients fhat_m for m = 0 ... N/2."""

    grid: GridSpec
    modes: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.modes, dtype=np.float64, copy=True)
        if m.shape != (self.grid.n_modes,):
            raise InvalidInputError(
                f"modes must have shape ({self.grid.n_modes},), got {m.shape}"
            )
        if not np.all(np.isfinite(m)):
            raise InvalidInputError("mode coefficients must all be finite")
        m.flags.writeable = False
        object.__setattr__(self, "modes", m)


# Internal fast paths on raw arrays; shared by the single-state integrator and
# the batched ensemble engine so both produce identical floating point output.
# They assume the input is (batches of) symmetric field values in FFT order
# and operate along the last axis.


def modes_from_values(values: np.ndarray) -> np.ndarray:
    n = values.shape[-1]
    c = np.fft.rfft(values).real
    c[..., 0] /= n
    c[..., 1:-1] *= SQRT2 / n
    c[..., -1] /= n
    return c


def values_from_modes(modes: np.ndarray) -> np.ndarray:
    n = 2 * (modes.shape[-1] - 1)
    c = np.array(modes, dtype=np.float64, copy=True)
    c[..., 0] *= n
    c[..., 1:-1] *= n / SQRT2
    c[..., -1] *= n
    v = np.fft.irfft(c, n=n)
    # mirror the half-circle samples: exact inverse up to round-off, and the
    # output is bit-exactly symmetric
    return mirror_half(v[..., : n // 2 + 1])


def heat_factors(n_modes: int, t: float, kappa: float) -> np.ndarray:
    m = np.arange(n_modes)
    return np.exp(-4.0 * np.pi**2 * m**2 * kappa * t)


def grad_weights(n_modes: int) -> np.ndarray:
    m = np.arange(n_modes)
    return (2.0 * np.pi * m) ** 2


# --- public operations ------------------------------------------------------


def to_spectral(f: GridField, tol: float = SYMMETRY_TOL) -> SpectralField:
    """Cosine modes of a symmetric field, by exact grid quadrature.

    The caller is responsible for symmetrizing first (``grid.symmetrize``)
    if the field only approximately satisfies f(x) = f(-x).
    """
    defect = symmetry_defect(f)
    if defect > tol:
        raise SymmetryError(
            f"field is asymmetric beyond tolerance: defect {defect:.3e} > {tol:.1e}"
        )
    return SpectralField(f.grid, modes_from_values(f.values))


def to_grid(s: SpectralField) -> GridField:
    """Evaluate sum_m fhat_m e_m on the grid (exact inverse of to_spectral)."""
    return GridField(s.grid, values_from_modes(s.modes))


def heat_propagate(s: SpectralField, t: float, kappa: float = 1.0) -> SpectralField:
    """Exact periodic heat semigroup: mode m is damped by exp(-4 pi^2 m^2 kappa t)."""
    if not (t >= 0.0):
        raise InvalidParameterError(f"heat time must be >= 0, got {t}")
    if not (kappa >= 0.0):
        raise InvalidParameterError(f"diffusivity must be >= 0, got {kappa}")
    return SpectralField(s.grid, s.modes * heat_factors(s.grid.n_modes, t, kappa))


def grad_norm_sq(s: SpectralField) -> float:
    """Squared L2 norm of the spatial gradient: sum_m (2 pi m)^2 fhat_m^2."""
    return float(np.dot(grad_weights(s.grid.n_modes), s.modes**2))


def random_symmetric(
    grid: GridSpec,
    rng: np.random.Generator,
    scale: float = 1.0,
    mode_decay: float = 1.0,
    max_mode: int | None = None,
) -> GridField:
    """Random symmetric field with Gaussian modes fhat_m ~ scale * max(m,1)^(-decay)."""
    n_modes = grid.n_modes
    amp = np.maximum(np.arange(n_modes), 1) ** (-float(mode_decay))
    if max_mode is not None:
        amp[max_mode + 1 :] = 0.0
    modes = scale * amp * rng.standard_normal(n_modes)
    return to_grid(SpectralField(grid, modes))
