"""Experiment harnesses: coupling contraction, Lyapunov ergodicity, exit times.

These drive the integrator over replica ensembles and condense the runs into
report dataclasses.  Conventions shared by all three:

* replicas are embarrassingly parallel with streams keyed (seed, replica id),
  so results do not depend on batching or worker layout;
* total-variation statements of the long-time theory are probed through a
  fixed panel of scalar observables (spatial mean, L2 norm, value at x = 0)
  compared by energy distance, stated as such in the reports;
* exit times are right-censored at the horizon; rows with more than 10%
  censoring are flagged and left out of the exit-time regression.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .drift import (
    DriftSpec,
    GRADIENT_VARIANTS,
    LinearDrift,
    check_assumptions,
    drift_values,
    potential_values,
)
from .ensemble import EnsembleSimulator, ingest_batch
from .errors import DissipativityError, InvalidInputError, InvalidParameterError
from .grid import GridField, GridSpec
from .integrator import StepConfig
from .noise import MetastableSpectrum, NoiseSpectrum, c_lambda, replica_rng
from .rearrange import rearrange_values
from .spectral import random_symmetric

OBSERVABLE_NAMES = ("mean", "norm2", "value_at_zero")


def observable_panel(values: np.ndarray) -> np.ndarray:
    """(replicas, 3) panel of scalar observables used for law comparison."""
    v2d = np.atleast_2d(values)
    n = v2d.shape[-1]
    return np.column_stack(
        [
            np.mean(v2d, axis=-1),
            np.sqrt(np.sum(v2d * v2d, axis=-1) / n),
            v2d[:, 0],
        ]
    )


def energy_distance(a: np.ndarray, b: np.ndarray, chunk: int = 256) -> float:
    """Energy distance between two samples of R^d-valued observables."""

    def mean_pair(x, y):
        total = 0.0
        for i in range(0, x.shape[0], chunk):
            d = x[i : i + chunk, None, :] - y[None, :, :]
            total += float(np.sqrt(np.sum(d * d, axis=-1)).sum())
        return total / (x.shape[0] * y.shape[0])

    d2 = 2.0 * mean_pair(a, b) - mean_pair(a, a) - mean_pair(b, b)
    return math.sqrt(max(d2, 0.0))


# --- synchronous coupling ----------------------------------------------------


@dataclass(frozen=True)
class CouplingReport:
    """Contraction diagnostics for two linearly drifted solutions sharing noise."""

    mu: float
    initial_distance: float
    times: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    ratios: np.ndarray = field(repr=False)
    sup_ratio: float
    time_integral: float
    integral_bound: float


def run_coupling(
    mu: float,
    u: GridField,
    v: GridField,
    horizon: float,
    dt: float,
    spectrum: NoiseSpectrum,
    seed: int,
    diffusivity: float = 1.0,
    amplitude: float = 1.0,
    stride: int = 10,
) -> CouplingReport:
    """Step u and v with identical noise under the linear drift -mu X.

    Reports sup_t ||X_t^u - X_t^v||_2 e^{mu t} / ||u - v||_2 and the trapezoid
    quadrature of the squared distance, with its theoretical bound
    ||u - v||_2^2 / (2 mu).
    """
    if u.grid != v.grid:
        raise InvalidInputError("coupled fields live on different grids")
    grid = u.grid
    cfg = StepConfig(
        dt=dt,
        drift=LinearDrift(mu),
        diffusivity=diffusivity,
        noise_amplitude=amplitude,
        spectrum=spectrum,
    )
    sim = EnsembleSimulator(
        grid,
        cfg,
        np.stack([u.values, v.values]),
        replica_ids=[0, 1],
        base_seed=seed,
        shared_noise=True,
    )
    n = grid.n_points
    n_steps = int(round(horizon / dt))

    def distance() -> float:
        d = sim.fields[0] - sim.fields[1]
        return math.sqrt(float(np.dot(d, d)) / n)

    d0 = distance()
    dist_all = np.empty(n_steps + 1)
    dist_all[0] = d0
    for k in range(n_steps):
        sim.step()
        dist_all[k + 1] = distance()
    times_all = dt * np.arange(n_steps + 1)
    keep = np.zeros(n_steps + 1, dtype=bool)
    keep[::stride] = True
    keep[-1] = True
    if d0 > 0.0:
        ratios_all = dist_all * np.exp(mu * times_all) / d0
    else:
        ratios_all = np.zeros(n_steps + 1)
    time_integral = float(np.trapezoid(dist_all**2, dx=dt))
    return CouplingReport(
        mu=mu,
        initial_distance=d0,
        times=times_all[keep],
        distances=dist_all[keep],
        ratios=ratios_all[keep],
        sup_ratio=float(np.max(ratios_all)),
        time_integral=time_integral,
        integral_bound=d0**2 / (2.0 * mu),
    )


# --- Lyapunov decay and observable-law convergence ---------------------------


@dataclass(frozen=True)
class ErgodicityReport:
    """Lyapunov fit plus observable-law energy distances between two ensembles."""

    lyapunov_c: float
    lyapunov_K: float
    r_squared: float
    fit_points: int
    times: np.ndarray = field(repr=False)
    norm_sq_means: np.ndarray = field(repr=False)  # (n_inits, n_steps+1)
    obs_times: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)
    initial_distance: float
    crossing_time: float
    plateau_from_ledger: float


def fit_exponential_decay(times: np.ndarray, series: np.ndarray):
    """Fit series(t) ~ K + (series(0)-K) e^{-ct} on the transient window.

    K is the plateau (mean of the last quarter); the window runs until the
    excess over K drops below 5% of its initial value.  Returns
    (c, K, r_squared, n_points).
    """
    tail = series[3 * len(series) // 4 :]
    k_hat = float(np.mean(tail))
    excess = series - k_hat
    e0 = excess[0]
    if e0 <= 0.0:
        return 0.0, k_hat, 0.0, 0
    below = np.nonzero(excess < 0.05 * e0)[0]
    end = int(below[0]) if below.size else len(series)
    end = max(end, 10)
    window = excess[:end]
    mask = window > 0.0
    if mask.sum() < 10:
        return 0.0, k_hat, 0.0, int(mask.sum())
    t = times[:end][mask]
    y = np.log(window[mask])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return float(-slope), k_hat, float(r2), int(mask.sum())


def run_lyapunov(
    drift: DriftSpec,
    inits: list[GridField],
    horizon: float,
    dt: float,
    spectrum: NoiseSpectrum,
    replicas: int,
    seed: int,
    diffusivity: float = 1.0,
    amplitude: float = 1.0,
    obs_stride: int = 50,
    assumption_budget: int = 120,
) -> ErgodicityReport:
    """Ensemble decay of E||X_t||_2^2 and law convergence between two starts.

    Refuses drifts whose fitted dissipativity constants violate the one-sided
    Lyapunov condition.
    """
    if not inits:
        raise InvalidParameterError("at least one initial condition is required")
    grid = inits[0].grid
    radius = max(float(np.sqrt(np.mean(f.values**2))) for f in inits) + 1.0
    gate = check_assumptions(
        drift, grid, assumption_budget, radius, replica_rng(seed, 2**40)
    )
    if not gate.dissipativity_ok:
        raise DissipativityError(
            "drift fails the one-sided Lyapunov condition: fitted "
            f"c1={gate.lyapunov_c1:.3g} (must be < 4 pi^2), "
            f"c2={gate.lyapunov_c2:.3g} (must be > 0)"
        )
    cfg = StepConfig(
        dt=dt,
        drift=drift,
        diffusivity=diffusivity,
        noise_amplitude=amplitude,
        spectrum=spectrum,
    )
    n_steps = int(round(horizon / dt))
    obs_steps = list(range(0, n_steps + 1, obs_stride))
    if obs_steps[-1] != n_steps:
        obs_steps.append(n_steps)
    norm_means = np.empty((len(inits), n_steps + 1))
    drift_means = np.empty((len(inits), n_steps))
    grad_means = np.empty((len(inits), n_steps))
    panels = []
    for i, init in enumerate(inits):
        sim = EnsembleSimulator(
            grid,
            cfg,
            np.tile(init.values, (replicas, 1)),
            replica_ids=range(i * replicas, (i + 1) * replicas),
            base_seed=seed,
        )
        norm_means[i, 0] = float(np.mean(np.sum(sim.fields**2, axis=-1))) / grid.n_points
        snapshots = {0: observable_panel(sim.fields)}
        obs_set = set(obs_steps[1:])
        for k in range(n_steps):
            diag = sim.step()
            norm_means[i, k + 1] = float(np.mean(diag["norm_sq"]))
            drift_means[i, k] = float(np.mean(diag["drift_inner"]))
            grad_means[i, k] = float(np.mean(diag["grad_norm_sq"]))
            if k + 1 in obs_set:
                snapshots[k + 1] = observable_panel(sim.fields)
        panels.append(snapshots)
    times = dt * np.arange(n_steps + 1)
    c_hat, k_hat, r2, n_fit = fit_exponential_decay(times, norm_means[0])
    # stationary balance of the energy ledger: 2<X,F> - 2 kappa ||grad X||^2
    # + amp^2 c_lambda = 0, giving an effective relaxation rate and with it a
    # prediction for the plateau of E||X||^2
    tail = slice(3 * n_steps // 4, n_steps)
    qv_rate = (
        cfg.noise_amplitude**2 * c_lambda(spectrum, grid.n_modes - 1)
        if cfg.has_noise
        else 0.0
    )
    eff_rate = (
        -np.mean(drift_means[0][tail]) + diffusivity * np.mean(grad_means[0][tail])
    ) / np.mean(norm_means[0][1:][tail])
    plateau_pred = qv_rate / (2.0 * eff_rate) if eff_rate > 0 else float("nan")
    if len(inits) >= 2:
        distances = np.array(
            [energy_distance(panels[0][k], panels[1][k]) for k in obs_steps]
        )
    else:
        distances = np.zeros(len(obs_steps))
    d0 = float(distances[0]) if distances.size else 0.0
    crossing = float("inf")
    for k_idx, k in enumerate(obs_steps):
        if d0 > 0 and distances[k_idx] <= 0.1 * d0:
            crossing = k * dt
            break
    return ErgodicityReport(
        lyapunov_c=c_hat,
        lyapunov_K=k_hat,
        r_squared=r2,
        fit_points=n_fit,
        times=times,
        norm_sq_means=norm_means,
        obs_times=dt * np.asarray(obs_steps, dtype=float),
        distances=distances,
        initial_distance=d0,
        crossing_time=crossing,
        plateau_from_ledger=float(plateau_pred),
    )


# --- metastable exit times ---------------------------------------------------


@dataclass(frozen=True)
class ExitTimeRow:
    epsilon: float
    replicas: int
    exited: int
    censored_count: int
    mean_tau: float
    stderr: float
    median_tau: float
    censored_flag: bool


@dataclass(frozen=True)
class ExitTimeReport:
    rows: list[ExitTimeRow]
    slope: float
    intercept: float
    r_squared: float
    trigger: str
    kappa_monotonicity: float


def _spot_check_monotonicity(
    drift: DriftSpec, x0: GridField, a: float, seed: int, samples: int = 100
) -> float:
    """min over the ball of <DV(X), X - X0> / ||X - X0||^2 (DV = -F)."""
    rng = replica_rng(seed, 2**41)
    grid = x0.grid
    n = grid.n_points
    worst = math.inf
    for _ in range(samples):
        delta = random_symmetric(grid, rng, mode_decay=1.5)
        norm = math.sqrt(float(np.mean(delta.values**2)))
        if norm == 0.0:
            continue
        target = a * float(rng.uniform(0.1, 0.99))
        x = rearrange_values(x0.values + delta.values * (target / norm))
        dx = x - x0.values
        dist_sq = float(np.dot(dx, dx)) / n
        if dist_sq == 0.0:
            continue
        dv = -drift_values(drift, x)
        worst = min(worst, float(np.dot(dv, dx)) / n / dist_sq)
    return worst


def _exit_chunk(args) -> tuple[int, np.ndarray]:
    """Worker: exit times for one (epsilon, replica range) chunk."""
    (
        eps_index,
        epsilon,
        drift,
        x0_values,
        grid_n,
        a,
        dt,
        horizon,
        seed,
        replica_ids,
        psi,
        theta1,
        theta2,
        tail_exponent,
        alpha,
        beta,
        trigger,
        kappa_hat,
    ) = args
    grid = GridSpec(grid_n)
    spectrum = MetastableSpectrum(
        theta1=theta1,
        theta2=theta2,
        psi=psi,
        beta=beta,
        epsilon=epsilon,
        tail_exponent=tail_exponent,
    )
    cfg = StepConfig(
        dt=dt,
        drift=drift,
        diffusivity=epsilon ** (2.0 * alpha),
        noise_amplitude=epsilon,
        spectrum=spectrum,
    )
    n_rep = len(replica_ids)
    sim = EnsembleSimulator(
        grid, cfg, np.tile(x0_values, (n_rep, 1)), replica_ids, seed
    )
    x0_proj = ingest_batch(x0_values[None, :])[0]
    if trigger == "potential":
        v0 = float(potential_values(drift, x0_proj))
        level = 0.5 * kappa_hat * a * a
    taus = {}
    n_steps = int(round(horizon / dt))
    for k in range(n_steps):
        sim.step()
        if trigger == "potential":
            out = potential_values(drift, sim.fields) - v0 >= level
        else:
            d = sim.fields - x0_proj
            out = np.sum(d * d, axis=-1) / grid_n >= a * a
        if np.any(out):
            t_exit = (k + 1) * dt
            for rid, hit in zip(sim.replica_ids, out):
                if hit:
                    taus[rid] = t_exit
            sim.compact(~out)
            if sim.n_replicas == 0:
                break
    result = np.array([taus.get(rid, np.nan) for rid in replica_ids])
    return eps_index, result


def run_exit_times(
    drift: DriftSpec,
    x0: GridField,
    a: float,
    eps_grid: list[float],
    replicas: int,
    horizon_per_eps: float,
    seed: int,
    dt: float = 2e-3,
    psi: float = 2.0,
    theta1: float = 1.0,
    theta2: float = 1.0,
    tail_exponent: float = 0.75,
    alpha: float = 2.0,
    beta: float = 2.0,
    trigger: str = "radius",
    n_workers: int | None = None,
    chunk_size: int = 64,
) -> ExitTimeReport:
    """Mean exit times from the radius-a ball around the critical point x0.

    Dynamics per epsilon: drift F = -DV, diffusivity eps^(2 alpha), noise
    amplitude eps, band spectrum with exponent beta (alpha = beta = 2 is the
    scaling regime of the exit-time bounds).  The report regresses
    log mean_tau on eps^(-2) over rows with at most 10% censoring.
    """
    if not isinstance(drift, GRADIENT_VARIANTS):
        raise InvalidParameterError("exit times need a gradient drift variant")
    if a <= 0.0:
        raise InvalidParameterError(f"exit radius must be > 0, got {a}")
    if trigger not in ("radius", "potential"):
        raise InvalidParameterError(f"unknown exit trigger {trigger!r}")
    grid = x0.grid
    f0 = drift_values(drift, x0.values)
    f0_norm = math.sqrt(float(np.mean(f0**2)))
    x0_norm = math.sqrt(float(np.mean(x0.values**2)))
    if f0_norm >= 1e-6 * (1.0 + x0_norm):
        raise InvalidParameterError(
            f"x0 is not a critical point: ||F(x0)|| = {f0_norm:.3g}"
        )
    kappa_hat = _spot_check_monotonicity(drift, x0, a, seed)
    if not kappa_hat > 0.0:
        raise InvalidParameterError(
            f"monotonicity constant must be positive near x0, got {kappa_hat:.3g}"
        )
    tasks = []
    for i, eps in enumerate(sorted(eps_grid, reverse=True)):
        for lo in range(0, replicas, chunk_size):
            ids = list(range(i * replicas + lo, i * replicas + min(lo + chunk_size, replicas)))
            tasks.append(
                (
                    i,
                    float(eps),
                    drift,
                    x0.values,
                    grid.n_points,
                    a,
                    dt,
                    horizon_per_eps,
                    seed,
                    ids,
                    psi,
                    theta1,
                    theta2,
                    tail_exponent,
                    alpha,
                    beta,
                    trigger,
                    kappa_hat,
                )
            )
    if n_workers is None:
        n_workers = int(os.environ.get("RSHE_WORKERS", "0") or 0)
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_exit_chunk, tasks))
    else:
        results = [_exit_chunk(t) for t in tasks]
    eps_sorted = sorted(eps_grid, reverse=True)
    taus_by_eps: dict[int, list[np.ndarray]] = {}
    for idx, taus in results:
        taus_by_eps.setdefault(idx, []).append(taus)
    rows = []
    for i, eps in enumerate(eps_sorted):
        taus = np.concatenate(taus_by_eps[i])
        exited = taus[np.isfinite(taus)]
        censored = int(np.sum(~np.isfinite(taus)))
        if exited.size:
            mean_tau = float(np.mean(exited))
            stderr = float(np.std(exited, ddof=1) / math.sqrt(exited.size)) if exited.size > 1 else float("inf")
            median = float(np.median(exited))
        else:
            mean_tau, stderr, median = float("nan"), float("nan"), float("nan")
        rows.append(
            ExitTimeRow(
                epsilon=float(eps),
                replicas=replicas,
                exited=int(exited.size),
                censored_count=censored,
                mean_tau=mean_tau,
                stderr=stderr,
                median_tau=median,
                censored_flag=censored > 0.10 * replicas,
            )
        )
    eligible = [r for r in rows if not r.censored_flag and r.exited > 0 and r.mean_tau > 0]
    if len(eligible) >= 2:
        x = np.array([r.epsilon**-2 for r in eligible])
        y = np.log(np.array([r.mean_tau for r in eligible]))
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    else:
        slope, intercept, r2 = float("nan"), float("nan"), float("nan")
    return ExitTimeReport(
        rows=rows,
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(r2),
        trigger=trigger,
        kappa_monotonicity=kappa_hat,
    )
