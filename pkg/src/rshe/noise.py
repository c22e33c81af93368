"""Coloured cylindrical Brownian increments on the cosine modes.

The driving noise is W_t = sum_m lambda_m beta^m_t e_m with independent
scalar Brownian motions beta^m.  Two colourings are provided:

* ``PowerLawSpectrum`` -- lambda_m = prefactor * m^(-lambda) beyond a cutoff
  rank, with exponent lambda in (1/2, 1) so that
  c_lambda = sum_m lambda_m^2 is finite; sup_m lambda_m <= 1.
* ``MetastableSpectrum`` -- the small-noise band structure
  lambda_k = sqrt(theta1) for k <= eps^(-beta), sqrt(theta2) up to
  psi * eps^(-beta) (psi > 1), and the k^(-lambda) tail beyond.  Threshold
  ranks use the floor of eps^(-beta).

One RNG stream per replica: ``replica_rng(base_seed, replica_id)`` keys a
counter-based Philox generator so ensembles are reproducible and
order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import InvalidParameterError
from .grid import GridField, GridSpec
from .spectral import SpectralField, to_grid


@dataclass(frozen=True)
class PowerLawSpectrum:
    """lambda_m = prefactor * m^(-lambda_exponent) for m >= cutoff_rank."""

    lambda_exponent: float
    prefactor: float = 1.0
    cutoff_rank: int = 1

    def __post_init__(self):
        if not 0.5 < self.lambda_exponent < 1.0:
            raise InvalidParameterError(
                "lambda_exponent must lie in the open interval (1/2, 1), "
                f"got {self.lambda_exponent}"
            )
        if not 0.0 < self.prefactor <= 1.0:
            raise InvalidParameterError(
                f"prefactor must lie in (0, 1], got {self.prefactor}"
            )
        if self.cutoff_rank < 1 or int(self.cutoff_rank) != self.cutoff_rank:
            raise InvalidParameterError(
                f"cutoff_rank must be an integer >= 1, got {self.cutoff_rank}"
            )


@dataclass(frozen=True)
class MetastableSpectrum:
    """Piecewise band spectrum for the vanishing-viscosity regime."""

    theta1: float
    theta2: float
    psi: float
    beta: float
    epsilon: float
    tail_exponent: float = 0.75

    def __post_init__(self):
        if self.theta1 <= 0.0 or self.theta2 <= 0.0:
            raise InvalidParameterError(
                f"theta1 and theta2 must be > 0, got {self.theta1}, {self.theta2}"
            )
        if self.psi <= 1.0:
            raise InvalidParameterError(f"psi must be > 1, got {self.psi}")
        if self.beta <= 0.0:
            raise InvalidParameterError(f"beta must be > 0, got {self.beta}")
        if self.epsilon <= 0.0:
            raise InvalidParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.5 < self.tail_exponent < 1.0:
            raise InvalidParameterError(
                "tail_exponent must lie in the open interval (1/2, 1), "
                f"got {self.tail_exponent}"
            )

    @property
    def band1_rank(self) -> int:
        return int(np.floor(self.epsilon ** (-self.beta)))

    @property
    def band2_rank(self) -> int:
        return int(np.floor(self.psi * self.epsilon ** (-self.beta)))


NoiseSpectrum = Union[PowerLawSpectrum, MetastableSpectrum]


@dataclass(frozen=True)
class NoiseIncrement:
    """One coloured increment Delta W over a step of length ``step``."""

    field: GridField
    step: float


def eigenvalues(spec: NoiseSpectrum, max_mode: int) -> np.ndarray:
    """Per-mode amplitudes (lambda_0, ..., lambda_max_mode)."""
    if max_mode < 1:
        raise InvalidParameterError(f"max_mode must be >= 1, got {max_mode}")
    m = np.arange(max_mode + 1)
    if isinstance(spec, PowerLawSpectrum):
        # below the cutoff rank only sup_m lambda_m <= 1 constrains the value;
        # the prefactor itself (<= 1) is used there
        lam = np.full(max_mode + 1, spec.prefactor)
        tail = m >= spec.cutoff_rank
        lam[tail] = spec.prefactor * m[tail].astype(float) ** (-spec.lambda_exponent)
        return lam
    if isinstance(spec, MetastableSpectrum):
        k1, k2 = spec.band1_rank, spec.band2_rank
        lam = np.empty(max_mode + 1)
        lam[m <= k1] = np.sqrt(spec.theta1)
        lam[(m > k1) & (m <= k2)] = np.sqrt(spec.theta2)
        tail = m > k2
        lam[tail] = m[tail].astype(float) ** (-spec.tail_exponent)
        return lam
    raise InvalidParameterError(f"unknown spectrum type {type(spec).__name__}")


def c_lambda(spec: NoiseSpectrum, max_mode: int) -> float:
    """Truncated quadratic variation rate sum_{m <= max_mode} lambda_m^2."""
    if max_mode < 0:
        raise InvalidParameterError(f"max_mode must be >= 0, got {max_mode}")
    lam = eigenvalues(spec, max(max_mode, 1))[: max_mode + 1]
    return float(np.dot(lam, lam))


@lru_cache(maxsize=None)
def _cached_eigenvalues(spec: NoiseSpectrum, n_modes: int) -> np.ndarray:
    lam = eigenvalues(spec, n_modes - 1)
    lam.flags.writeable = False
    return lam


def sample_increment(
    spec: NoiseSpectrum, grid: GridSpec, dt: float, rng: np.random.Generator
) -> NoiseIncrement:
    """Draw Delta W with independent mode coefficients N(0, lambda_m^2 dt)."""
    if not dt > 0.0:
        raise InvalidParameterError(f"dt must be > 0, got {dt}")
    lam = _cached_eigenvalues(spec, grid.n_modes)
    coeffs = lam * np.sqrt(dt) * rng.standard_normal(grid.n_modes)
    return NoiseIncrement(to_grid(SpectralField(grid, coeffs)), dt)


def replica_rng(base_seed: int, replica_id: int) -> np.random.Generator:
    """Counter-based stream keyed by (base_seed, replica_id)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence((int(base_seed), int(replica_id))))
    )
