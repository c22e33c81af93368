"""Command-line runner.

    rshe <experiment> --config FILE [--set key=value]... [--seed N] [--out DIR]

Experiments: simulate, coupling, lyapunov, exit-times, check-drift.  The run
manifest is written before any data; data files are CSV / JSON-lines /
binary snapshots.  Exit codes: 0 ok, 2 configuration error, 3 numerical
blow-up, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

from . import __version__
from .config import EXPERIMENTS, RunConfig, parse_config
from .drift import check_assumptions
from .errors import BlowUpError, ConfigError, RsheError
from .experiments import run_coupling, run_exit_times, run_lyapunov
from .integrator import StepConfig, simulate
from .io import JsonlRecorder, write_csv, write_snapshot
from .noise import replica_rng

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_IO = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rshe", description=__doc__)
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON config file")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config entry (dotted keys, JSON values)",
    )
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    return p


def _write_manifest(cfg: RunConfig, data_files, status):
    manifest = {
        "package": "rshe",
        "version": __version__,
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "config": cfg.echo,
        "data_files": sorted(data_files),
        "status": status,
        "written_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    path = os.path.join(cfg.out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _step_config(cfg: RunConfig) -> StepConfig:
    return StepConfig(
        dt=cfg.dt,
        drift=cfg.drift,
        diffusivity=cfg.diffusivity,
        noise_amplitude=cfg.noise_amplitude,
        spectrum=cfg.spectrum,
    )


def _run_simulate(cfg: RunConfig):
    series = os.path.join(cfg.out_dir, "series.jsonl")
    snap = os.path.join(cfg.out_dir, "snapshot_final.bin")
    with JsonlRecorder(series) as rec:
        state = simulate(
            cfg.initial,
            _step_config(cfg),
            cfg.horizon,
            recorder=rec,
            stride=cfg.stride,
            base_seed=cfg.seed,
            replica=0,
        )
    write_snapshot(snap, state.field)
    return ["series.jsonl", "snapshot_final.bin"]


def _run_coupling(cfg: RunConfig):
    report = run_coupling(
        mu=cfg.mu,
        u=cfg.initial,
        v=cfg.initial_b,
        horizon=cfg.horizon,
        dt=cfg.dt,
        spectrum=cfg.spectrum,
        seed=cfg.seed,
        diffusivity=cfg.diffusivity,
        amplitude=cfg.noise_amplitude,
        stride=cfg.stride,
    )
    write_csv(
        os.path.join(cfg.out_dir, "coupling.csv"),
        ["t", "distance", "ratio"],
        zip(report.times, report.distances, report.ratios),
    )
    summary = {
        "mu": report.mu,
        "initial_distance": report.initial_distance,
        "sup_ratio": report.sup_ratio,
        "time_integral": report.time_integral,
        "integral_bound": report.integral_bound,
    }
    with open(os.path.join(cfg.out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ["coupling.csv", "summary.json"]


def _run_lyapunov(cfg: RunConfig):
    report = run_lyapunov(
        drift=cfg.drift,
        inits=[cfg.initial, cfg.initial_b],
        horizon=cfg.horizon,
        dt=cfg.dt,
        spectrum=cfg.spectrum,
        replicas=cfg.replicas,
        seed=cfg.seed,
        diffusivity=cfg.diffusivity,
        amplitude=cfg.noise_amplitude,
        obs_stride=cfg.obs_stride,
    )
    write_csv(
        os.path.join(cfg.out_dir, "lyapunov.csv"),
        ["t", "norm_sq_mean_a", "norm_sq_mean_b"],
        zip(report.times, report.norm_sq_means[0], report.norm_sq_means[1]),
    )
    write_csv(
        os.path.join(cfg.out_dir, "distances.csv"),
        ["t", "energy_distance"],
        zip(report.obs_times, report.distances),
    )
    summary = {
        "lyapunov_c": report.lyapunov_c,
        "lyapunov_K": report.lyapunov_K,
        "r_squared": report.r_squared,
        "initial_distance": report.initial_distance,
        "crossing_time": report.crossing_time,
        "plateau_from_ledger": report.plateau_from_ledger,
    }
    with open(os.path.join(cfg.out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ["lyapunov.csv", "distances.csv", "summary.json"]


def _run_exit_times(cfg: RunConfig):
    ep = cfg.exit
    report = run_exit_times(
        drift=cfg.drift,
        x0=cfg.initial,
        a=ep.a,
        eps_grid=list(ep.eps_grid),
        replicas=cfg.replicas,
        horizon_per_eps=ep.horizon_per_eps,
        seed=cfg.seed,
        dt=cfg.dt,
        psi=ep.psi,
        theta1=ep.theta1,
        theta2=ep.theta2,
        tail_exponent=ep.tail_exponent,
        alpha=ep.alpha,
        beta=ep.beta,
        trigger=ep.trigger,
        n_workers=cfg.workers if cfg.workers > 0 else None,
    )
    write_csv(
        os.path.join(cfg.out_dir, "exit_times.csv"),
        [
            "epsilon",
            "replicas",
            "exited",
            "censored_count",
            "mean_tau",
            "stderr",
            "median_tau",
            "censored_flag",
        ],
        (
            (
                r.epsilon,
                r.replicas,
                r.exited,
                r.censored_count,
                r.mean_tau,
                r.stderr,
                r.median_tau,
                int(r.censored_flag),
            )
            for r in report.rows
        ),
    )
    summary = {
        "slope": report.slope,
        "intercept": report.intercept,
        "r_squared": report.r_squared,
        "trigger": report.trigger,
        "kappa_monotonicity": report.kappa_monotonicity,
    }
    with open(os.path.join(cfg.out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ["exit_times.csv", "summary.json"]


def _run_check_drift(cfg: RunConfig):
    report = check_assumptions(
        cfg.drift,
        cfg.grid,
        cfg.check.sample_budget,
        cfg.check.radius,
        replica_rng(cfg.seed, 2**40),
    )
    rows = report.summary_rows()
    width = max(len(name) for name, _ in rows)
    print(f"drift assumption report ({report.samples} samples)")
    for name, value in rows:
        print(f"  {name:<{width}}  {value: .6g}")
    with open(os.path.join(cfg.out_dir, "report.json"), "w") as fh:
        json.dump({name: value for name, value in rows}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ["report.json"]


_RUNNERS = {
    "simulate": _run_simulate,
    "coupling": _run_coupling,
    "lyapunov": _run_lyapunov,
    "exit-times": _run_exit_times,
    "check-drift": _run_check_drift,
}


def run(cfg: RunConfig) -> int:
    try:
        os.makedirs(cfg.out_dir, exist_ok=True)
        _write_manifest(cfg, [], "running")
    except OSError as err:
        print(f"rshe: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    try:
        files = _RUNNERS[cfg.experiment](cfg)
        _write_manifest(cfg, files, "complete")
    except BlowUpError as err:
        print(f"rshe: blow-up: {err}", file=sys.stderr)
        return EXIT_BLOWUP
    except OSError as err:
        print(f"rshe: I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except RsheError as err:
        print(f"rshe: {err}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = parse_config(
            args.config if args.config is not None else {},
            overrides=args.overrides,
            experiment=args.experiment,
            seed=args.seed,
            out_dir=args.out,
        )
    except ConfigError as err:
        print(f"rshe: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
