"""Energy balance residual of the reference pulse run under step halving."""

import argparse
import time

from _common import reference, table
from vkfsi.coupled_galerkin import build_system, integrate, zero_state
from vkfsi.diagnostics_energy import TrajectoryLog, balance_residual


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--dts", default="2e-3,1e-3,5e-4,2.5e-4")
    args = ap.parse_args()
    cfg, grids, params, bases = reference(args.config)
    sys_ = build_system(bases, params)
    forcing = cfg.forcing_spec(grids)
    rows, prev = [], None
    for dt in (float(x) for x in args.dts.split(",")):
        t0 = time.perf_counter()
        log = TrajectoryLog(sys_, forcing, stride=50)
        integrate(zero_state(sys_), sys_, forcing, dt, int(round(cfg.time.t_end / dt)), cfg.time.scheme, observer=log)
        r = balance_residual(log)
        rows.append((f"{dt:.2e}", f"{r:.3e}", "-" if prev is None else f"{prev / r:.3f}", f"{max(log.energy):.4f}", f"{time.perf_counter() - t0:.1f}s"))
        prev = r
    table(("dt", "residual", "ratio", "max E", "time"), rows)


if __name__ == "__main__":
    main()
