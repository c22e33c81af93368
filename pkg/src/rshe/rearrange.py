"""Symmetric non-increasing rearrangement on the discrete circle.

The rearrangement u* of a field u keeps the value multiset and reorders it
so that the largest value sits at x = 0 and successive values alternate
around it: positions 0, +1/N, -1/N, +2/N, -2/N, ..., 1/2.  Along that path
the values are non-increasing, and for every +/-k pair the larger member
sits at the non-negative index.  Exact grid symmetry holds up to one cell
per pair, which vanishes as N grows.

The projection displacement ||u - u*||_2 is the per-step stand-in for the
reflection increment of the constrained dynamics; the integrator accumulates
it as the observable counterpart of the reflection pairing.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import GridField

ADMISSIBLE_TOL = 1e-12


@dataclass(frozen=True)
class RearrangeReport:
    """Projection displacement ||u - u*||_2 and whether u was a fixed point."""

    displacement: float
    was_already_sorted: bool


@lru_cache(maxsize=None)
def placement_order(n: int) -> np.ndarray:
    """Target indices for descending ranks: 0, +1, -1, +2, -2, ..., N/2."""
    pos = np.empty(n, dtype=np.intp)
    pos[0] = 0
    pos[1::2] = np.arange(1, n // 2 + 1)
    pos[2::2] = n - np.arange(1, n // 2)
    pos.flags.writeable = False
    return pos


def rearrange_values(values: np.ndarray) -> np.ndarray:
    """Array form of the rearrangement; operates along the last axis."""
    pos = placement_order(values.shape[-1])
    # stable argsort on the negated values: descending order with ties broken
    # by grid index, which makes the map deterministic and idempotent
    order = np.argsort(-values, axis=-1, kind="stable")
    ranked = np.take_along_axis(values, order, axis=-1)
    out = np.empty_like(values)
    out[..., pos] = ranked
    return out


def rearrange(f: GridField) -> tuple[GridField, RearrangeReport]:
    """Symmetric non-increasing rearrangement of f with its displacement."""
    out = rearrange_values(f.values)
    unchanged = bool(np.array_equal(out, f.values))
    if unchanged:
        displacement = 0.0
    else:
        diff = out - f.values
        displacement = float(np.sqrt(np.dot(diff, diff) / f.grid.n_points))
    return GridField(f.grid, out), RearrangeReport(displacement, unchanged)


def is_admissible(f: GridField, tol: float = ADMISSIBLE_TOL) -> bool:
    """Whether f is (within tol) a fixed point of the rearrangement."""
    _, report = rearrange(f)
    return report.displacement < tol


def random_admissible(
    grid,
    rng: np.random.Generator,
    radius: float = 1.0,
    mode_decay: float = 1.0,
) -> GridField:
    """Random admissible field with L2 norm uniform in (0, radius]."""
    from .grid import norm_l2
    from .spectral import random_symmetric

    f = random_symmetric(grid, rng, mode_decay=mode_decay)
    r = norm_l2(f)
    if r == 0.0:
        f = GridField(grid, np.ones(grid.n_points))
        r = 1.0
    target = radius * float(rng.uniform(0.05, 1.0))
    scaled = GridField(grid, f.values * (target / r))
    out, _ = rearrange(scaled)
    return out
