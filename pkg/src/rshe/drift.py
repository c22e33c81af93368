"""Drift library F mapping symmetric fields to symmetric fields.

Variants:

* ``ZeroDrift``            F(u) = 0
* ``LinearDrift``          F(u) = -mu u
* ``WassersteinQuadraticDrift``  F(u) = -2 w (u - center); the gradient of
  the squared quantile distance w ||u - center||_2^2 to a fixed admissible
  target, differentiable only along segments inside the admissible cone.
* ``InteractionDrift``     pairwise interaction through a tabulated kernel
  derivative g = grad w plus a quadratic confinement penalty:
  F(u)(x) = -[ int (g(u(x)-u(y)) - g(u(y)-u(x))) dy + 2 c u(x) ]
* ``DoubleWellDrift``      gradient of the product potential
  V(u) = s ||u-a||_2^2 ||u-b||_2^2, a benchmark with two local minima.

Every variant is given by an explicit formula that is well defined on all
symmetric fields and restricts to the intended drift on admissible ones, so
splitting sub-steps that transiently leave the admissible cone evaluate the
same closed form.  ``check_assumptions`` estimates, by Monte-Carlo over
random admissible fields, the structural constants used by the long-time
theory: the quadratic growth bound on ||F(u)||^2, the gradient growth bound,
the one-sided Lyapunov (dissipativity) inequality

    <F(u), u>  <=  C_L + c1 ||u - ubar||^2 - c2 ubar^2,

which must hold with c1 < 4 pi^2 (the inverse squared Poincare constant of
the circle) and c2 > 0, and the bounded-oscillation constant at a given
radius.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    InvalidInputError,
    InvalidParameterError,
    KernelRangeError,
    UnsupportedVariantError,
)
from .grid import GridField, GridSpec, symmetrize_values
from .rearrange import is_admissible, random_admissible, rearrange_values
from .spectral import grad_weights, modes_from_values

logger = logging.getLogger(__name__)

POINCARE_CONSTANT = 1.0 / (2.0 * np.pi)  # first circle eigenvalue is 4 pi^2


@dataclass(frozen=True)
class ZeroDrift:
    pass


@dataclass(frozen=True)
class LinearDrift:
    mu: float

    def __post_init__(self):
        if not self.mu > 0.0:
            raise InvalidParameterError(f"mu must be > 0, got {self.mu}")


@dataclass(frozen=True)
class WassersteinQuadraticDrift:
    center: GridField
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0.0:
            raise InvalidParameterError(f"weight must be > 0, got {self.weight}")
        if not is_admissible(self.center):
            raise InvalidParameterError(
                "center of the quadratic quantile potential must be admissible"
            )


class InteractionKernel:
    """Tabulated kernel derivative g = grad w with its exact antiderivative.

    A table given on r >= 0 is extended to negative arguments by oddness
    (symmetric interaction).  Between nodes g is linear, so w is the
    piecewise quadratic with w(0) = 0; both are evaluated exactly.
    Arguments beyond the tabulated range are clamped to the end values.
    """

    def __init__(self, r: np.ndarray, dw: np.ndarray):
        r = np.asarray(r, dtype=np.float64)
        dw = np.asarray(dw, dtype=np.float64)
        if r.ndim != 1 or r.shape != dw.shape or r.size < 2:
            raise InvalidInputError("kernel table needs two equal-length columns")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(dw))):
            raise InvalidInputError("kernel table must be finite")
        if np.any(np.diff(r) <= 0.0):
            raise InvalidInputError("kernel abscissae must be strictly increasing")
        if r[0] >= 0.0:
            # odd extension; drop a duplicated node at r = 0
            keep = slice(1, None) if r[0] == 0.0 else slice(None)
            r = np.concatenate([-r[::-1], r[keep]])
            dw = np.concatenate([-dw[::-1], dw[keep]])
        self.r = r
        self.dw = dw
        self.slopes = np.diff(dw) / np.diff(r)
        # antiderivative at the nodes (trapezoid is exact for linear pieces)
        w_nodes = np.concatenate([[0.0], np.cumsum(0.5 * (dw[1:] + dw[:-1]) * np.diff(r))])
        self._w_nodes = w_nodes - self._eval_w_raw(np.zeros(1), w_nodes)[0]

    @property
    def max_slope(self) -> float:
        return float(np.max(np.abs(self.slopes)))

    def _segments(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xc = np.clip(x, self.r[0], self.r[-1])
        idx = np.clip(np.searchsorted(self.r, xc, side="right") - 1, 0, self.r.size - 2)
        return xc, idx

    def out_of_range(self, x: np.ndarray) -> int:
        return int(np.count_nonzero((x < self.r[0]) | (x > self.r[-1])))

    def dw_at(self, x: np.ndarray) -> np.ndarray:
        xc, idx = self._segments(x)
        return self.dw[idx] + self.slopes[idx] * (xc - self.r[idx])

    def _eval_w_raw(self, x: np.ndarray, w_nodes: np.ndarray) -> np.ndarray:
        xc, idx = self._segments(x)
        d = xc - self.r[idx]
        inside = w_nodes[idx] + self.dw[idx] * d + 0.5 * self.slopes[idx] * d * d
        # linear continuation where the derivative is clamped
        return inside + self.dw_at(xc) * (x - xc)

    def w_at(self, x: np.ndarray) -> np.ndarray:
        return self._eval_w_raw(x, self._w_nodes)


def load_kernel_csv(path) -> InteractionKernel:
    """Kernel derivative from a two-column CSV of (r, grad w(r)) rows."""
    table = np.loadtxt(path, delimiter=",", ndmin=2)
    if table.ndim != 2 or table.shape[1] != 2:
        raise InvalidInputError(f"kernel CSV must have two columns, got {table.shape}")
    return InteractionKernel(table[:, 0], table[:, 1])


@dataclass(frozen=True)
class InteractionDrift:
    kernel: InteractionKernel
    penalty: float = 0.0
    strict_range: bool = False

    def __post_init__(self):
        if self.penalty < 0.0:
            raise InvalidParameterError(f"penalty must be >= 0, got {self.penalty}")


@dataclass(frozen=True)
class DoubleWellDrift:
    a: GridField
    b: GridField
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0.0:
            raise InvalidParameterError(f"scale must be > 0, got {self.scale}")
        if self.a.grid != self.b.grid:
            raise InvalidInputError("double-well centers live on different grids")


DriftSpec = Union[
    ZeroDrift, LinearDrift, WassersteinQuadraticDrift, InteractionDrift, DoubleWellDrift
]

GRADIENT_VARIANTS = (
    LinearDrift,
    WassersteinQuadraticDrift,
    InteractionDrift,
    DoubleWellDrift,
)


def _sq_norm(values: np.ndarray) -> np.ndarray:
    """Quadrature ||.||_2^2 along the last axis (keeps leading axes)."""
    return np.sum(values * values, axis=-1, keepdims=True) / values.shape[-1]


def _interaction_values(spec: InteractionDrift, values: np.ndarray) -> np.ndarray:
    v2d = np.atleast_2d(values)
    n = v2d.shape[-1]
    diff = v2d[:, :, None] - v2d[:, None, :]  # u(x) - u(y)
    oob = spec.kernel.out_of_range(diff)
    if oob:
        if spec.strict_range:
            raise KernelRangeError(
                f"{oob} pairwise differences left the tabulated kernel range"
            )
        logger.warning(
            "interaction kernel clamped on %d pairwise differences", oob
        )
    g = spec.kernel.dw_at(diff)
    # g(u(x)-u(y)) integrated over y, minus the transposed term
    pair = (g.sum(axis=2) - g.sum(axis=1)) / n
    out = -(pair + 2.0 * spec.penalty * v2d)
    return out.reshape(values.shape)


def drift_values(spec: DriftSpec, values: np.ndarray) -> np.ndarray:
    """F(u) on raw value arrays; batches along leading axes."""
    if isinstance(spec, ZeroDrift):
        return np.zeros_like(values)
    if isinstance(spec, LinearDrift):
        return -spec.mu * values
    if isinstance(spec, WassersteinQuadraticDrift):
        return -2.0 * spec.weight * (values - spec.center.values)
    if isinstance(spec, DoubleWellDrift):
        da = values - spec.a.values
        db = values - spec.b.values
        return -2.0 * spec.scale * (da * _sq_norm(db) + db * _sq_norm(da))
    if isinstance(spec, InteractionDrift):
        return _interaction_values(spec, values)
    raise InvalidParameterError(f"unknown drift type {type(spec).__name__}")


def eval_drift(spec: DriftSpec, u: GridField) -> GridField:
    """Evaluate the drift field F(u)."""
    if isinstance(spec, WassersteinQuadraticDrift) and u.grid != spec.center.grid:
        raise InvalidInputError("field and drift center live on different grids")
    if isinstance(spec, DoubleWellDrift) and u.grid != spec.a.grid:
        raise InvalidInputError("field and drift centers live on different grids")
    return GridField(u.grid, drift_values(spec, u.values))


def potential_values(spec: DriftSpec, values: np.ndarray) -> np.ndarray:
    """V(u) on raw value arrays; batches along the leading axis."""
    if not isinstance(spec, GRADIENT_VARIANTS):
        raise UnsupportedVariantError(
            f"{type(spec).__name__} does not derive from a potential"
        )
    v2d = np.atleast_2d(values)
    n = v2d.shape[-1]
    if isinstance(spec, LinearDrift):
        out = 0.5 * spec.mu * np.sum(v2d * v2d, axis=-1) / n
    elif isinstance(spec, WassersteinQuadraticDrift):
        d = v2d - spec.center.values
        out = spec.weight * np.sum(d * d, axis=-1) / n
    elif isinstance(spec, DoubleWellDrift):
        da = v2d - spec.a.values
        db = v2d - spec.b.values
        out = spec.scale * np.sum(da * da, axis=-1) * np.sum(db * db, axis=-1) / n**2
    else:
        diff = v2d[:, :, None] - v2d[:, None, :]
        pair = np.sum(spec.kernel.w_at(diff), axis=(1, 2)) / n**2
        out = pair + spec.penalty * np.sum(v2d * v2d, axis=-1) / n
    return out if values.ndim > 1 else out[0]


def eval_potential(spec: DriftSpec, u: GridField) -> float:
    """Potential V(u) with -DV = eval_drift; gradient variants only."""
    return float(potential_values(spec, u.values))


def lipschitz_bound(spec: DriftSpec, radius: float) -> float:
    """Safe overestimate of the local Lipschitz constant of F on ||u|| <= radius."""
    if isinstance(spec, ZeroDrift):
        return 0.0
    if isinstance(spec, LinearDrift):
        return spec.mu
    if isinstance(spec, WassersteinQuadraticDrift):
        return 2.0 * spec.weight
    if isinstance(spec, DoubleWellDrift):
        ra = radius + float(np.sqrt(np.mean(spec.a.values**2)))
        rb = radius + float(np.sqrt(np.mean(spec.b.values**2)))
        return 3.0 * spec.scale * (ra + rb) ** 2
    if isinstance(spec, InteractionDrift):
        return 4.0 * spec.kernel.max_slope + 2.0 * spec.penalty
    raise InvalidParameterError(f"unknown drift type {type(spec).__name__}")


@dataclass(frozen=True)
class AssumptionReport:
    """Monte-Carlo witnesses for the structural drift assumptions."""

    growth_cF: float
    gradient_CF: float
    dissipativity_margin: float
    oscillation_CO: float
    lyapunov_CL: float
    lyapunov_c1: float
    lyapunov_c2: float
    dissipativity_ok: bool
    samples: int

    def summary_rows(self):
        return [
            ("growth_cF", self.growth_cF),
            ("gradient_CF", self.gradient_CF),
            ("dissipativity_margin", self.dissipativity_margin),
            ("oscillation_CO", self.oscillation_CO),
            ("lyapunov_CL", self.lyapunov_CL),
            ("lyapunov_c1", self.lyapunov_c1),
            ("lyapunov_c2", self.lyapunov_c2),
            ("dissipativity_ok", float(self.dissipativity_ok)),
        ]


def _grad_sq_of_values(values: np.ndarray) -> float:
    modes = modes_from_values(symmetrize_values(values))
    return float(np.dot(grad_weights(modes.shape[-1]), modes**2))


def check_assumptions(
    spec: DriftSpec,
    grid: GridSpec,
    sample_budget: int,
    radius: float,
    rng: np.random.Generator,
) -> AssumptionReport:
    """Empirically witness the growth / dissipativity / oscillation constants.

    Samples random admissible fields with mean offsets inside the radius-R
    ball.  The dissipativity constants (C_L, c1, c2) are fitted by least
    squares of <F(u), u> against (1, ||u - ubar||^2, ubar^2); the report is
    flagged as violating the one-sided condition when the fitted c2 is not
    positive or c1 reaches 1/c_P^2.
    """
    if sample_budget < 100:
        raise InvalidParameterError(
            f"sample_budget must be >= 100, got {sample_budget}"
        )
    n = grid.n_points
    growth = 0.0
    grad_ratio = 0.0
    osc = 0.0
    g_vals = np.empty(sample_budget)
    d_vals = np.empty(sample_budget)
    m_vals = np.empty(sample_budget)
    for i in range(sample_budget):
        base = random_admissible(grid, rng, radius=0.5 * radius)
        shift = float(rng.uniform(-0.5 * radius, 0.5 * radius))
        u = GridField(grid, base.values + shift)
        fu = drift_values(spec, u.values)
        nu2 = float(np.dot(u.values, u.values)) / n
        growth = max(growth, float(np.dot(fu, fu)) / n / (1.0 + nu2))
        grad_ratio = max(
            grad_ratio,
            _grad_sq_of_values(fu) / (1.0 + _grad_sq_of_values(u.values)),
        )
        ubar = float(np.mean(u.values))
        g_vals[i] = float(np.dot(fu, u.values)) / n
        d_vals[i] = nu2 - ubar**2
        m_vals[i] = ubar**2
        # admissible oscillation partner at distance <= R: perturb and project
        # back (the rearrangement contracts, so the distance stays below R)
        delta = random_admissible(grid, rng, radius=radius)
        vvals = rearrange_values(u.values + delta.values - np.mean(delta.values))
        fv = drift_values(spec, vvals)
        osc = max(osc, float(np.sqrt(np.dot(fu - fv, fu - fv) / n)))
    design = np.column_stack([np.ones(sample_budget), d_vals, m_vals])
    coef, *_ = np.linalg.lstsq(design, g_vals, rcond=None)
    c_l = max(float(coef[0]), 0.0)
    c1 = max(float(coef[1]), 0.0)
    c2 = -float(coef[2])
    margin = float(np.min(c_l + c1 * d_vals - c2 * m_vals - g_vals))
    ok = c2 > 0.0 and c1 < 1.0 / POINCARE_CONSTANT**2
    return AssumptionReport(
        growth_cF=growth,
        gradient_CF=grad_ratio,
        dissipativity_margin=margin,
        oscillation_CO=osc,
        lyapunov_CL=c_l,
        lyapunov_c1=c1,
        lyapunov_c2=c2,
        dissipativity_ok=ok,
        samples=sample_budget,
    )
