"""Run configuration: strict JSON config files plus dotted-key overrides.

Unknown keys are rejected everywhere (a typo in a parameter name must fail
loudly, not silently fall back to a default), every validation error names
the offending key and its admissible range, and the fully-populated config
is echoed into the run manifest.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .drift import (
    DoubleWellDrift,
    DriftSpec,
    InteractionDrift,
    LinearDrift,
    WassersteinQuadraticDrift,
    ZeroDrift,
    load_kernel_csv,
)
from .errors import ConfigError, InvalidInputError, InvalidParameterError, RsheError
from .grid import GridField, GridSpec, constant_field, sample_cosine
from .io import read_snapshot
from .measures import normal_quantile_field
from .noise import MetastableSpectrum, NoiseSpectrum, PowerLawSpectrum, replica_rng
from .rearrange import random_admissible

EXPERIMENTS = ("simulate", "coupling", "lyapunov", "exit-times", "check-drift")


@dataclass(frozen=True)
class ExitParams:
    a: float
    eps_grid: tuple[float, ...]
    horizon_per_eps: float
    theta1: float = 1.0
    theta2: float = 1.0
    psi: float = 2.0
    tail_exponent: float = 0.75
    alpha: float = 2.0
    beta: float = 2.0
    trigger: str = "radius"


@dataclass(frozen=True)
class CheckParams:
    sample_budget: int = 200
    radius: float = 2.0


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    grid: GridSpec
    dt: float
    diffusivity: float
    noise_amplitude: float
    spectrum: Optional[NoiseSpectrum]
    drift: DriftSpec
    seed: int
    out_dir: str
    stride: int
    workers: int
    horizon: float
    replicas: int
    mu: float
    obs_stride: int
    initial: Optional[GridField]
    initial_b: Optional[GridField]
    exit: Optional[ExitParams]
    check: CheckParams
    echo: dict = field(repr=False)


def _check_keys(d: dict, allowed, context: str):
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(
            f"unknown key(s) {unknown} in {context}; allowed keys: {sorted(allowed)}"
        )


def _require(d: dict, key: str, context: str):
    if key not in d:
        raise ConfigError(f"missing required key '{key}' in {context}")
    return d[key]


def _number(d: dict, key: str, context: str, default=None):
    if key not in d:
        if default is None:
            raise ConfigError(f"missing required key '{key}' in {context}")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{context}.{key} must be a number, got {v!r}")
    return v


def _build_spectrum(d: dict) -> NoiseSpectrum:
    variant = _require(d, "variant", "spectrum")
    try:
        if variant == "power-law":
            _check_keys(
                d, ("variant", "lambda_exponent", "prefactor", "cutoff_rank"), "spectrum"
            )
            return PowerLawSpectrum(
                lambda_exponent=_number(d, "lambda_exponent", "spectrum"),
                prefactor=_number(d, "prefactor", "spectrum", 1.0),
                cutoff_rank=int(_number(d, "cutoff_rank", "spectrum", 1)),
            )
        if variant == "metastable":
            _check_keys(
                d,
                ("variant", "theta1", "theta2", "psi", "beta", "epsilon", "tail_exponent"),
                "spectrum",
            )
            return MetastableSpectrum(
                theta1=_number(d, "theta1", "spectrum"),
                theta2=_number(d, "theta2", "spectrum"),
                psi=_number(d, "psi", "spectrum"),
                beta=_number(d, "beta", "spectrum"),
                epsilon=_number(d, "epsilon", "spectrum"),
                tail_exponent=_number(d, "tail_exponent", "spectrum", 0.75),
            )
    except InvalidParameterError as err:
        raise ConfigError(f"spectrum: {err}") from err
    raise ConfigError(
        f"spectrum.variant must be 'power-law' or 'metastable', got {variant!r}"
    )


def _build_field(d: dict, grid: GridSpec, seed: int, context: str) -> GridField:
    kind = _require(d, "kind", context)
    try:
        if kind == "constant":
            _check_keys(d, ("kind", "value"), context)
            return constant_field(grid, _number(d, "value", context))
        if kind == "cosine":
            _check_keys(d, ("kind", "mode", "amplitude", "offset"), context)
            f = sample_cosine(
                grid,
                int(_number(d, "mode", context, 1)),
                _number(d, "amplitude", context, 1.0),
            )
            off = _number(d, "offset", context, 0.0)
            return GridField(grid, f.values + off) if off else f
        if kind == "gaussian_quantile":
            _check_keys(d, ("kind", "mean", "std"), context)
            return normal_quantile_field(
                grid, _number(d, "mean", context, 0.0), _number(d, "std", context, 1.0)
            )
        if kind == "random":
            _check_keys(d, ("kind", "norm", "stream"), context)
            rng = replica_rng(seed, 2**50 + int(_number(d, "stream", context, 0)))
            f = random_admissible(grid, rng, radius=1.0)
            target = _number(d, "norm", context, 1.0)
            r = float(np.sqrt(np.mean(f.values**2)))
            return GridField(grid, f.values * (target / r))
        if kind == "snapshot":
            _check_keys(d, ("kind", "path"), context)
            path = _require(d, "path", context)
            if not os.path.exists(path):
                raise ConfigError(f"{context}.path does not exist: {path}")
            f = read_snapshot(path)
            if f.grid != grid:
                raise ConfigError(
                    f"{context}: snapshot has N={f.grid.n_points}, config grid "
                    f"has N={grid.n_points}"
                )
            return f
    except (InvalidParameterError, InvalidInputError) as err:
        raise ConfigError(f"{context}: {err}") from err
    raise ConfigError(f"{context}.kind must be one of constant/cosine/"
                      f"gaussian_quantile/random/snapshot, got {kind!r}")


def _build_drift(d: dict, grid: GridSpec, seed: int) -> DriftSpec:
    variant = _require(d, "variant", "drift")
    try:
        if variant == "zero":
            _check_keys(d, ("variant",), "drift")
            return ZeroDrift()
        if variant == "linear":
            _check_keys(d, ("variant", "mu"), "drift")
            return LinearDrift(mu=_number(d, "mu", "drift"))
        if variant == "wasserstein-quadratic":
            _check_keys(d, ("variant", "weight", "center"), "drift")
            center = _build_field(_require(d, "center", "drift"), grid, seed, "drift.center")
            return WassersteinQuadraticDrift(
                center=center, weight=_number(d, "weight", "drift", 1.0)
            )
        if variant == "interaction":
            _check_keys(d, ("variant", "kernel_csv", "penalty", "strict_range"), "drift")
            path = _require(d, "kernel_csv", "drift")
            if not os.path.exists(path):
                raise ConfigError(f"drift.kernel_csv does not exist: {path}")
            return InteractionDrift(
                kernel=load_kernel_csv(path),
                penalty=_number(d, "penalty", "drift", 0.0),
                strict_range=bool(d.get("strict_range", False)),
            )
        if variant == "double-well":
            _check_keys(d, ("variant", "a", "b", "scale"), "drift")
            return DoubleWellDrift(
                a=_build_field(_require(d, "a", "drift"), grid, seed, "drift.a"),
                b=_build_field(_require(d, "b", "drift"), grid, seed, "drift.b"),
                scale=_number(d, "scale", "drift", 1.0),
            )
    except (InvalidParameterError, InvalidInputError) as err:
        raise ConfigError(f"drift: {err}") from err
    raise ConfigError(
        "drift.variant must be one of zero/linear/wasserstein-quadratic/"
        f"interaction/double-well, got {variant!r}"
    )


def _build_exit(d: dict) -> ExitParams:
    _check_keys(
        d,
        (
            "a",
            "eps_grid",
            "horizon_per_eps",
            "theta1",
            "theta2",
            "psi",
            "tail_exponent",
            "alpha",
            "beta",
            "trigger",
        ),
        "exit",
    )
    eps = _require(d, "eps_grid", "exit")
    if not isinstance(eps, (list, tuple)) or not eps:
        raise ConfigError("exit.eps_grid must be a non-empty list of numbers")
    psi = _number(d, "psi", "exit", 2.0)
    if psi <= 1.0:
        raise ConfigError(f"exit.psi must be > 1, got {psi}")
    tail = _number(d, "tail_exponent", "exit", 0.75)
    if not 0.5 < tail < 1.0:
        raise ConfigError(
            f"exit.tail_exponent must lie in the open interval (1/2, 1), got {tail}"
        )
    trigger = d.get("trigger", "radius")
    if trigger not in ("radius", "potential"):
        raise ConfigError(f"exit.trigger must be 'radius' or 'potential', got {trigger!r}")
    return ExitParams(
        a=_number(d, "a", "exit"),
        eps_grid=tuple(float(e) for e in eps),
        horizon_per_eps=_number(d, "horizon_per_eps", "exit"),
        theta1=_number(d, "theta1", "exit", 1.0),
        theta2=_number(d, "theta2", "exit", 1.0),
        psi=psi,
        tail_exponent=tail,
        alpha=_number(d, "alpha", "exit", 2.0),
        beta=_number(d, "beta", "exit", 2.0),
        trigger=trigger,
    )


TOP_KEYS = (
    "experiment",
    "grid",
    "dt",
    "diffusivity",
    "noise_amplitude",
    "spectrum",
    "drift",
    "seed",
    "out_dir",
    "stride",
    "workers",
    "horizon",
    "replicas",
    "mu",
    "obs_stride",
    "initial",
    "initial_b",
    "exit",
    "check",
)


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply --set key.path=value pairs; values parsed as JSON when possible."""
    out = json.loads(json.dumps(raw))  # deep copy, JSON types only
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, text = item.partition("=")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a non-section value")
        node[parts[-1]] = value
    return out


def parse_config(
    source,
    overrides=(),
    experiment: Optional[str] = None,
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> RunConfig:
    """Validate a config mapping or JSON file into a RunConfig."""
    if isinstance(source, (str, os.PathLike)):
        if not os.path.exists(source):
            raise ConfigError(f"config file does not exist: {source}")
        try:
            with open(source) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file is not valid JSON: {err}") from err
    else:
        raw = dict(source)
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    raw = apply_overrides(raw, overrides)
    if seed is not None:
        raw["seed"] = seed
    if out_dir is not None:
        raw["out_dir"] = out_dir
    if experiment is not None:
        if "experiment" in raw and raw["experiment"] != experiment:
            raise ConfigError(
                f"config names experiment {raw['experiment']!r} but "
                f"{experiment!r} was requested"
            )
        raw["experiment"] = experiment

    _check_keys(raw, TOP_KEYS, "config")
    exp = _require(raw, "experiment", "config")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")

    grid_block = _require(raw, "grid", "config")
    _check_keys(grid_block, ("n_points",), "grid")
    try:
        grid = GridSpec(int(_number(grid_block, "n_points", "grid")))
    except InvalidParameterError as err:
        raise ConfigError(f"grid: {err}") from err

    seed_v = int(_number(raw, "seed", "config", 0))
    dt = _number(raw, "dt", "config", 1e-3)
    if dt <= 0:
        raise ConfigError(f"dt must be > 0, got {dt}")
    diffusivity = _number(raw, "diffusivity", "config", 1.0)
    if diffusivity < 0:
        raise ConfigError(f"diffusivity must be >= 0, got {diffusivity}")
    amplitude = _number(raw, "noise_amplitude", "config", 1.0)
    if amplitude < 0:
        raise ConfigError(f"noise_amplitude must be >= 0, got {amplitude}")
    stride = int(_number(raw, "stride", "config", 10))
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    workers = int(_number(raw, "workers", "config", 0))
    horizon = _number(raw, "horizon", "config", 1.0)
    if horizon < 0:
        raise ConfigError(f"horizon must be >= 0, got {horizon}")
    replicas = int(_number(raw, "replicas", "config", 100))
    if replicas < 1:
        raise ConfigError(f"replicas must be >= 1, got {replicas}")
    mu = _number(raw, "mu", "config", 1.0)
    obs_stride = int(_number(raw, "obs_stride", "config", 50))

    spectrum = None
    if exp == "exit-times":
        if "spectrum" in raw:
            raise ConfigError(
                "exit-times builds its metastable spectrum from the 'exit' "
                "block; remove the 'spectrum' section"
            )
    elif "spectrum" in raw:
        spectrum = _build_spectrum(raw["spectrum"])
    elif amplitude > 0 and exp in ("simulate", "coupling", "lyapunov"):
        raise ConfigError(
            "a 'spectrum' section is required when noise_amplitude > 0"
        )

    drift = (
        _build_drift(raw["drift"], grid, seed_v) if "drift" in raw else ZeroDrift()
    )

    initial = (
        _build_field(raw["initial"], grid, seed_v, "initial")
        if "initial" in raw
        else None
    )
    initial_b = (
        _build_field(raw["initial_b"], grid, seed_v, "initial_b")
        if "initial_b" in raw
        else None
    )
    if exp in ("simulate", "coupling", "lyapunov", "exit-times") and initial is None:
        raise ConfigError(f"experiment {exp!r} requires an 'initial' field block")
    if exp in ("coupling", "lyapunov") and initial_b is None:
        raise ConfigError(f"experiment {exp!r} requires an 'initial_b' field block")
    if exp == "coupling" and mu <= 0:
        raise ConfigError(f"mu must be > 0 for coupling, got {mu}")

    exit_params = None
    if exp == "exit-times":
        if "exit" not in raw:
            raise ConfigError("experiment 'exit-times' requires an 'exit' block")
        exit_params = _build_exit(raw["exit"])

    check = CheckParams()
    if "check" in raw:
        _check_keys(raw["check"], ("sample_budget", "radius"), "check")
        check = CheckParams(
            sample_budget=int(_number(raw["check"], "sample_budget", "check", 200)),
            radius=_number(raw["check"], "radius", "check", 2.0),
        )
        if check.sample_budget < 100:
            raise ConfigError(
                f"check.sample_budget must be >= 100, got {check.sample_budget}"
            )

    echo = dict(raw)
    echo.setdefault("seed", seed_v)
    echo.setdefault("dt", dt)
    echo.setdefault("diffusivity", diffusivity)
    echo.setdefault("noise_amplitude", amplitude)
    echo.setdefault("stride", stride)
    echo.setdefault("out_dir", raw.get("out_dir", "out"))

    return RunConfig(
        experiment=exp,
        grid=grid,
        dt=dt,
        diffusivity=diffusivity,
        noise_amplitude=amplitude,
        spectrum=spectrum,
        drift=drift,
        seed=seed_v,
        out_dir=raw.get("out_dir", "out"),
        stride=stride,
        workers=workers,
        horizon=horizon,
        replicas=replicas,
        mu=mu,
        obs_stride=obs_stride,
        initial=initial,
        initial_b=initial_b,
        exit=exit_params,
        check=check,
        echo=echo,
    )
