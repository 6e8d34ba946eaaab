"""Sup-in-time distance between rho > 0 trajectories and the rho = 0 trajectory."""

import argparse

import numpy as np

from _common import reference, table
from vkfsi.coupled_galerkin import build_system, integrate, zero_state
from vkfsi.stationary_solver import energy_distance


def trajectory(bases, params, forcing, dt, nsteps, scheme, every=10):
    sys_ = build_system(bases, params)
    out = []
    integrate(zero_state(sys_), sys_, forcing, dt, nsteps, scheme, observer=lambda k, s: out.append(s) if k % every == 0 else None)
    return sys_, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--rhos", default="1e-1,1e-2,1e-3,1e-4")
    ap.add_argument("--scheme", default="rk4")
    args = ap.parse_args()
    cfg, grids, params, bases = reference(args.config)
    forcing = cfg.forcing_spec(grids)
    dt, nsteps = cfg.time.dt, int(round(cfg.time.t_end / cfg.time.dt))
    sys0, ref = trajectory(bases, params.with_(rho=0.0), forcing, dt, nsteps, args.scheme)
    print(f"rho = 0: min eig M = {np.linalg.eigvalsh(sys0.M).min():.4g}")
    rows = []
    for rho in (float(x) for x in args.rhos.split(",")):
        _, tr = trajectory(bases, params.with_(rho=rho), forcing, dt, nsteps, args.scheme)
        d = max(energy_distance(a, b, sys0) for a, b in zip(tr, ref))
        rows.append((f"{rho:.0e}", f"{d:.4e}", f"{d / rho:.3f}"))
    table(("rho", "sup distance", "distance / rho"), rows)


if __name__ == "__main__":
    main()
