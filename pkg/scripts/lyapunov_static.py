"""Relaxation under a static load: Phi along the trajectory and the distance to the stationary point."""

import argparse

import numpy as np

from _common import ROOT, reference, table
from vkfsi.coupled_galerkin import build_system, integrate, zero_state
from vkfsi.diagnostics_energy import TrajectoryLog
from vkfsi.stationary_solver import StationaryProblem, energy_distance, hessian_at, solve_stationary, stationary_state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "stationary.ini"))
    ap.add_argument("--rows", type=int, default=11)
    args = ap.parse_args()
    cfg, grids, params, bases = reference(args.config)
    sys_ = build_system(bases, params)
    forcing = cfg.forcing_spec(grids)
    prob = StationaryProblem(sys_, forcing)
    star = solve_stationary(prob)
    H = hessian_at(star.beta, prob)
    print("stationary point:", star.summary())
    dt, nsteps = cfg.time.dt, int(round(cfg.time.t_end / cfg.time.dt))
    log = TrajectoryLog(sys_, forcing, stride=cfg.time.stride, keep_states=True)
    integrate(zero_state(sys_), sys_, forcing, dt, nsteps, cfg.time.scheme, observer=log)
    phi = log.phi_series()
    print(f"max step increase of Phi: {np.max(np.diff(phi)):.3e}; Phi(end) = {phi[-1]:.6g}, Pi(u*) = {star.pi:.6g}")
    dist = [energy_distance(s, stationary_state(star.beta, sys_), sys_, H) for s in log.states]
    pick = np.linspace(0, len(dist) - 1, args.rows).astype(int)
    table(("t", "Phi", "distance"), [(f"{log.states[i].t:.2f}", f"{phi[i * cfg.time.stride]:.6g}", f"{dist[i]:.4e}") for i in pick])


if __name__ == "__main__":
    main()
