"""Command-line harness: evolve, scan-r, level-dynamics, fit, classical, defaults.

Every command reads a plain-text config (``dkrotor defaults`` prints one),
writes CSV data files with JSON metadata sidecars, and is deterministic:
the same config and seed give byte-identical outputs for any worker count.

Momentum columns come in two unit systems: ``*_m2`` values use lattice
units (p measured in units of kbar, i.e. <(m+beta)^2>), ``*_scaled``
values the dimensionless momentum p = kbar*(m+beta) itself.
"""

from __future__ import annotations

import argparse
import sys
import numpy as np

from .classical import classical_diffusion, classical_evolve, ClassicalEnsemble
from .config import ConfigError, RunConfig, default_config_text, load_config
from .floquet import detect_avoided_crossings, lambda_sweep
from .model import DriveSchedule, SystemParams, init_state
from .parallel import ordered_map, resolve_workers
from .propagator import evolve_quasiperiodic
from .serialize import (
    SchemaError,
    column,
    fmt_float,
    read_csv,
    read_sidecar,
    write_csv,
    write_json,
    write_sidecar,
)
from .spectroscopy import (
    ResonanceScan,
    WidthError,
    fit_lineshape,
    measure_width,
    resonance_scan,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCHEMA = 3
EXIT_NOCONVERGENCE = 4

EVOLVE_COLUMNS = ["kick_index", "p2_m2", "p2_scaled", "p0"]
SCAN_COLUMNS = [
    "r",
    "p0_mean",
    "p0_sigma",
    "p2_m2_mean",
    "p2_m2_sigma",
    "p2_scaled_mean",
    "n_lambda0",
    "errors",
]
TRACK_COLUMNS = [
    "lambda",
    "track_id",
    "eigenphase",
    "weight",
    "p_centroid_m",
    "p_centroid_scaled",
    "weight_class",
]
AC_COLUMNS = [
    "lambda_star",
    "gap",
    "track_a",
    "track_b",
    "momentum_distance_m",
    "momentum_distance_scaled",
]
CLASSICAL_COLUMNS = ["kick_index", "p2_scaled", "p2_m2"]


def _system_params(cfg: RunConfig) -> SystemParams:
    return SystemParams(
        K=cfg.K,
        kbar=cfg.kbar,
        beta=cfg.beta,
        M=cfg.M,
        pulse_width=cfg.pulse_width,
        substeps=cfg.substeps,
    )


def run_evolve(cfg: RunConfig, output: str) -> dict:
    """Time series of p2 and p0 over N periods; returns summary info."""
    params = _system_params(cfg)
    psi0 = init_state(params, "delta")
    sched = DriveSchedule(r=cfg.r, lambda0=cfg.lambda0, N=cfg.N)
    result = evolve_quasiperiodic(psi0, sched, params, p0_window=cfg.p0_window)
    kbar2 = cfg.kbar**2
    rows = [
        (rec.kick_index, rec.p2, kbar2 * rec.p2, rec.p0) for rec in result.records
    ]
    write_csv(output, EVOLVE_COLUMNS, rows)
    write_sidecar(
        output,
        cfg.as_dict(),
        "evolve",
        extra={"flags": result.flags},
    )
    return {"rows": len(rows), "flags": result.flags}


def scan_grid(cfg: RunConfig) -> np.ndarray:
    return np.linspace(cfg.r_min, cfg.r_max, cfg.r_count)


def write_scan_outputs(scan: ResonanceScan, cfg: RunConfig, output: str) -> dict:
    """Scan CSV (ascending r) plus width and lineshape JSON reports.

    A width measurement failure goes into the report, not the exit status;
    the data file is always written.
    """
    kbar2 = scan.params.kbar**2
    rows = []
    for i in range(scan.r_grid.size):
        rows.append(
            (
                scan.r_grid[i],
                scan.p0[i],
                scan.p0_sigma[i],
                scan.p2[i],
                scan.p2_sigma[i],
                kbar2 * scan.p2[i],
                len(scan.lambda0_values),
                scan.errors[i],
            )
        )
    write_csv(output, SCAN_COLUMNS, rows)
    write_sidecar(
        output,
        cfg.as_dict(),
        "scan-r",
        extra={
            "lambda0_values": list(scan.lambda0_values),
            "N": scan.N,
            "p0_window": scan.p0_window,
            "r_grid": [float(r) for r in scan.r_grid],
        },
    )

    width_path = output + ".width.json"
    try:
        width = measure_width(scan)
        width_payload = {
            "fwhm_r": width.fwhm_r,
            "fourier_width": width.fourier_width,
            "sub_fourier_factor": width.sub_fourier_factor,
            "delta_lambda": width.delta_lambda,
            "peak_r": width.peak_r,
            "peak_value": width.peak_value,
            "baseline": width.baseline,
        }
    except WidthError as exc:
        width_payload = {"error": str(exc)}
    write_json(width_path, width_payload)

    fit = fit_lineshape(scan)
    fit_payload = _fit_payload(fit, scan.N)
    write_json(output + ".fit.json", fit_payload)
    return {"width": width_payload, "fit": fit_payload}


def _fit_payload(fit, N: int) -> dict:
    return {
        "N": N,
        "p2_dl": fit.p2_dl,
        "d_cl": fit.d_cl,
        "lambda_scale": fit.lambda_scale,
        "amplitude": fit.amplitude,
        "residual_rms": fit.residual_rms,
        "peak_value": fit.peak_value,
        "converged": fit.converged,
        "message": fit.message,
        "n_starts": fit.n_starts,
    }


def run_scan(cfg: RunConfig, output: str, workers: int) -> dict:
    params = _system_params(cfg)
    psi0 = init_state(params, "delta")
    lam0s = cfg.lambda0_values()

    def mapper(fn, items):
        return ordered_map(fn, items, workers)

    scan = resonance_scan(
        scan_grid(cfg),
        params,
        psi0,
        N=cfg.N,
        lambda0_values=lam0s,
        p0_window=cfg.p0_window,
        beta_values=cfg.beta_values(),
        map_fn=mapper,
    )
    return write_scan_outputs(scan, cfg, output)


def run_level_dynamics(cfg: RunConfig, output: str, ac_output: str | None) -> dict:
    params = _system_params(cfg)
    psi0 = init_state(params, "delta")
    grid = np.linspace(cfg.lambda_min, cfg.lambda_max, cfg.lambda_count)
    if grid[-1] >= 1.0:
        grid[-1] = np.nextafter(1.0, 0.0)
    thresholds = (cfg.weight_threshold_thin, cfg.weight_threshold_thick)
    tracks = lambda_sweep(
        grid, params, psi0, weight_thresholds=thresholds, min_step=cfg.min_step
    )

    kbar = cfg.kbar
    classes = tracks.weight_class()
    rows = []
    for i, lam in enumerate(tracks.lambda_grid):
        for t in range(tracks.n_tracks):
            rows.append(
                (
                    lam,
                    t,
                    tracks.eigenphases[i, t],
                    tracks.weights[i, t],
                    tracks.p_centroids[i, t],
                    kbar * (tracks.p_centroids[i, t] + cfg.beta),
                    int(classes[i, t]),
                )
            )
    write_csv(output, TRACK_COLUMNS, rows)
    write_sidecar(
        output,
        cfg.as_dict(),
        "level-dynamics",
        extra={"flags": tracks.flags, "n_tracks": tracks.n_tracks},
    )

    acs = detect_avoided_crossings(tracks)
    ac_path = ac_output or (output + ".acs.csv")
    ac_rows = [
        (
            ac.lambda_star,
            ac.gap,
            ac.level_pair[0],
            ac.level_pair[1],
            ac.momentum_distance,
            kbar * ac.momentum_distance,
        )
        for ac in acs
    ]
    write_csv(ac_path, AC_COLUMNS, ac_rows)
    write_sidecar(ac_path, cfg.as_dict(), "level-dynamics/acs")
    return {
        "grid_points": int(tracks.lambda_grid.size),
        "tracks": tracks.n_tracks,
        "avoided_crossings": len(acs),
        "flags": tracks.flags,
    }


def run_fit(scan_csv: str, output: str | None, n_override: int | None) -> tuple[dict, int]:
    header, rows = read_csv(scan_csv, expected_columns=["r", "p0_mean", "p2_m2_mean"])
    r = column(header, rows, "r")
    p0 = column(header, rows, "p0_mean")
    p2 = column(header, rows, "p2_m2_mean")
    p0_sigma = column(header, rows, "p0_sigma")
    p2_sigma = column(header, rows, "p2_m2_sigma")
    meta = read_sidecar(scan_csv)
    if n_override is not None:
        N = n_override
    elif meta and "N" in meta:
        N = int(meta["N"])
    elif meta and "config" in meta and "N" in meta["config"]:
        N = int(meta["config"]["N"])
    else:
        raise SchemaError(
            f"{scan_csv}: no metadata sidecar with N found; pass --kicks"
        )
    cfg_dict = meta.get("config", {}) if meta else {}
    params = SystemParams(
        K=cfg_dict.get("K", 10.0),
        kbar=cfg_dict.get("kbar", 1.0) or 1.0,
        beta=cfg_dict.get("beta", 0.0),
        M=max(int(cfg_dict.get("M", 256)), 8),
    )
    scan = ResonanceScan(
        r_grid=r,
        p0=p0,
        p2=p2,
        p0_sigma=p0_sigma,
        p2_sigma=p2_sigma,
        N=N,
        params=params,
        lambda0_values=tuple(meta.get("lambda0_values", ())) if meta else (),
    )
    fit = fit_lineshape(scan)
    payload = _fit_payload(fit, N)
    if output:
        write_json(output, payload)
    return payload, (EXIT_OK if fit.converged else EXIT_NOCONVERGENCE)


def run_classical(cfg: RunConfig, output: str | None) -> dict:
    params = _system_params(cfg)
    est = classical_diffusion(
        cfg.K,
        schedule=DriveSchedule(r=cfg.r, lambda0=cfg.lambda0, N=cfg.n_periods),
        ensemble_size=cfg.ensemble_size,
        seed=cfg.seed,
        lambda0_values=cfg.lambda0_values(),
    )
    payload = {
        "d_per_period": est.d_per_period,
        "d_per_kick": est.d_per_kick,
        "stat_error_per_period": est.stat_error_per_period,
        "ensemble_size": est.ensemble_size,
        "n_kicks": est.n_kicks,
        "quasilinear_per_kick": cfg.K**2 / 2.0,
        "warnings": est.warnings,
    }
    if output:
        ens = ClassicalEnsemble.uniform(cfg.ensemble_size, cfg.seed)
        sched = DriveSchedule(r=cfg.r, lambda0=cfg.lambda0, N=cfg.n_periods)
        kicks, p2 = classical_evolve(ens, sched, params)
        kbar2 = cfg.kbar**2
        rows = [(int(k), v, v / kbar2) for k, v in zip(kicks, p2)]
        write_csv(output, CLASSICAL_COLUMNS, rows)
        write_sidecar(output, cfg.as_dict(), "classical", extra={"report": payload})
    return payload


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dkrotor",
        description="Doubly-kicked quantum rotor simulations and analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="INI config file (defaults otherwise)")

    p = sub.add_parser("evolve", help="time series of p2/p0 over N periods")
    add_config(p)
    p.add_argument("--output", required=True, help="output CSV path")

    p = sub.add_parser("scan-r", help="resonance scan over the period ratio")
    add_config(p)
    p.add_argument("--output", required=True, help="output CSV path")

    p = sub.add_parser("level-dynamics", help="Floquet eigenphases versus phase offset")
    add_config(p)
    p.add_argument("--output", required=True, help="tracks CSV path")
    p.add_argument("--ac-output", help="avoided-crossing CSV path (default <output>.acs.csv)")

    p = sub.add_parser("fit", help="lineshape fit of a stored scan CSV")
    p.add_argument("--scan", required=True, help="scan CSV produced by scan-r")
    p.add_argument("--output", help="fit report JSON path (stdout otherwise)")
    p.add_argument("--kicks", type=int, help="override N when no sidecar exists")

    p = sub.add_parser("classical", help="classical ensemble diffusion constant")
    add_config(p)
    p.add_argument("--output", help="optional time-series CSV path")

    sub.add_parser("defaults", help="print the default configuration")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "defaults":
        sys.stdout.write(default_config_text())
        return EXIT_OK
    try:
        cfg = load_config(getattr(args, "config", None))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "evolve":
            info = run_evolve(cfg, args.output)
            print(f"wrote {args.output} ({info['rows']} rows)")
            for flag in info["flags"]:
                print(f"note: {flag}")
        elif args.command == "scan-r":
            workers = resolve_workers(cfg.workers)
            info = run_scan(cfg, args.output, workers)
            print(f"wrote {args.output}")
            if "error" in info["width"]:
                print(f"width: {info['width']['error']}")
            else:
                print(
                    "width: fwhm_r={} sub_fourier_factor={}".format(
                        fmt_float(info["width"]["fwhm_r"]),
                        fmt_float(info["width"]["sub_fourier_factor"]),
                    )
                )
        elif args.command == "level-dynamics":
            info = run_level_dynamics(cfg, args.output, args.ac_output)
            print(
                f"wrote {args.output}: {info['grid_points']} grid points, "
                f"{info['avoided_crossings']} avoided crossings"
            )
            for flag in info["flags"]:
                print(f"note: {flag}")
        elif args.command == "fit":
            payload, code = run_fit(args.scan, args.output, args.kicks)
            if not args.output:
                import json

                print(json.dumps(payload, indent=2, sort_keys=True))
            if code != EXIT_OK:
                print(f"fit did not converge: {payload['message']}", file=sys.stderr)
            return code
        elif args.command == "classical":
            payload = run_classical(cfg, args.output)
            print(
                "D_cl per period = {} +- {}".format(
                    fmt_float(payload["d_per_period"]),
                    fmt_float(payload["stat_error_per_period"]),
                )
            )
            for w in payload["warnings"]:
                print(f"warning: {w}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
