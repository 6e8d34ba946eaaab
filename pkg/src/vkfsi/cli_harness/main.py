"""Command line entry point.

Exit codes: 0 ok, 1 failed verification checks, 2 configuration error,
3 numerical abort, 4 basis cache mismatch, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..coupled_galerkin import NumericalAbort, build_bases, build_system, integrate, reconstruct, stable_dt, zero_state
from ..diagnostics_energy import CSV_COLUMNS, TrajectoryLog, balance_residual
from ..stationary_solver import StationaryProblem, solve_stationary, stationary_state
from .config import ConfigError, RunConfig, parse_config, validate
from .io import CacheMismatch, load_bases, save_bases, write_blob, write_csv, write_manifest
from .verify import Verifier, format_report

logger = logging.getLogger("vkfsi")

EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CACHE, EXIT_IO = 0, 1, 2, 3, 4, 5


def _parse_modes(text: str) -> tuple[int, int]:
    try:
        m, n = (int(x) for x in text.split(","))
    except ValueError:
        raise ConfigError("modes", f"--modes expects M,N, got {text!r}") from None
    return m, n


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.out is not None:
        cfg.output.dir = args.out
    if args.seed is not None:
        cfg.run.seed = args.seed
    if args.dt is not None:
        cfg.time.dt = args.dt
    if args.modes is not None:
        cfg.modes.m, cfg.modes.n = _parse_modes(args.modes)
    return validate(cfg)


def obtain_bases(cfg: RunConfig, grids, params, rebuild: bool = False):
    """Load the basis cache if present (refusing a mismatched one), else build and store it."""
    path = cfg.cache_path
    if path.with_suffix(".json").exists() and not rebuild:
        bases = load_bases(path, grids, params, cfg.modes.m, cfg.modes.n)
        logger.info("loaded basis cache %s", path)
        return bases, []
    bases = build_bases(grids, params, cfg.modes.m, cfg.modes.n)
    files = save_bases(path, bases, params)
    logger.info("wrote basis cache %s", path)
    return bases, files


def cmd_basis(cfg: RunConfig) -> int:
    grids, params = cfg.grids(), cfg.physical()
    bases, _ = obtain_bases(cfg, grids, params, rebuild=True)
    summary = {
        "stokes_mu": bases.stokes.mu.tolist(),
        "transversal_kappa": bases.transversal.values.tolist(),
        "inplane_kappa": bases.inplane.values.tolist(),
    }
    print(json.dumps(summary, indent=1))
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    out = Path(cfg.output.dir)
    grids, params = cfg.grids(), cfg.physical()
    bases, files = obtain_bases(cfg, grids, params)
    sys_ = build_system(bases, params)
    forcing = cfg.forcing_spec(grids)
    dt = cfg.time.dt if cfg.time.dt is not None else stable_dt(sys_)
    nsteps = int(round(cfg.time.t_end / dt))
    files = list(files)
    if nsteps == 0:
        files.append(write_csv(out / "timeseries.csv", CSV_COLUMNS, []))
        write_manifest(out, files)
        return EXIT_OK
    log = TrajectoryLog(sys_, forcing, stride=cfg.time.stride, keep_states=cfg.output.snapshot_every > 0)
    try:
        integrate(zero_state(sys_), sys_, forcing, dt, nsteps, cfg.time.scheme, observer=log)
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    files.append(write_csv(out / "timeseries.csv", CSV_COLUMNS, [r.row() for r in log.reports()]))
    if cfg.output.snapshot_every > 0:
        for i, st in enumerate(log.states):
            if i % cfg.output.snapshot_every:
                continue
            v, u, ut = reconstruct(st, bases)
            arrays = {"alpha": st.alpha, "beta": st.beta, "betadot": st.betadot, "frozen_mean": st.frozen_mean, "v": v, "u": u, "u_t": ut}
            files += write_blob(out / "snapshots" / f"snap_{i:06d}", arrays, {"t": st.t})
    summary = {"dt": dt, "steps": nsteps, "balance_residual": balance_residual(log)}
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    files.append(out / "summary.json")
    write_manifest(out, files)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_stationary(cfg: RunConfig) -> int:
    out = Path(cfg.output.dir)
    grids, params = cfg.grids(), cfg.physical()
    forcing = cfg.forcing_spec(grids)
    if not forcing.stationary_compatible:
        raise ConfigError("forcing.preset", f"preset {forcing.name!r} is not stationary-compatible")
    bases, files = obtain_bases(cfg, grids, params)
    sys_ = build_system(bases, params)
    res = solve_stationary(StationaryProblem(sys_, forcing))
    _, u, _ = reconstruct(stationary_state(res.beta, sys_), bases)
    files = list(files) + write_blob(out / "stationary", {"beta": res.beta, "u": u}, res.summary())
    (out / "stationary_summary.json").write_text(json.dumps(res.summary(), indent=1, sort_keys=True) + "\n")
    files.append(out / "stationary_summary.json")
    write_manifest(out, files)
    print(json.dumps(res.summary()))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, only=None) -> int:
    out = Path(cfg.output.dir)
    grids, params = cfg.grids(), cfg.physical()
    bases, files = obtain_bases(cfg, grids, params)
    results = Verifier(grids, params, bases, seed=cfg.run.seed).run(only)
    d = cfg.domain
    header = (
        f"verify: fluid {d.nx}x{d.ny}x{d.nz}, shell {d.shell_nx}x{d.shell_ny}, "
        f"m={cfg.modes.m}, n={cfg.modes.n}, seed={cfg.run.seed}"
    )
    report = format_report(results, header)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify_report.txt").write_text(report)
    write_manifest(out, list(files) + [out / "verify_report.txt"])
    print(report, end="")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECKS


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vkfsi", description="Fluid / von Karman shell spectral-Galerkin simulator")
    ap.add_argument("command", choices=["basis", "simulate", "stationary", "verify"])
    ap.add_argument("--config", help="INI configuration file (defaults: reference setup)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--dt", type=float)
    ap.add_argument("--modes", help="override mode counts as M,N")
    ap.add_argument("--check", action="append", help="verify: run only the named check (repeatable)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    np.seterr(all="ignore")
    try:
        cfg = apply_overrides(parse_config(args.config), args)
        if args.command == "basis":
            return cmd_basis(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "stationary":
            return cmd_stationary(cfg)
        return cmd_verify(cfg, args.check)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CacheMismatch as exc:
        print(f"cache mismatch: {exc}", file=sys.stderr)
        return EXIT_CACHE
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
