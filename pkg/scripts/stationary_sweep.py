"""Stationary solves over a range of static load amplitudes, flat and curved shells."""

import argparse

import numpy as np

from _common import reference, table
from vkfsi.coupled_galerkin import build_system, forcing_preset
from vkfsi.stationary_solver import StationaryProblem, hessian_at, solve_stationary


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--amplitudes", default="10,100,1000,3000")
    args = ap.parse_args()
    _, grids, params, bases = reference(args.config)
    rows = []
    for label, p in (("flat", params.with_(k1=0.0, k2=0.0)), ("curved", params.with_(k1=0.5, k2=0.3))):
        sys_ = build_system(bases, p)
        for a in (float(x) for x in args.amplitudes.split(",")):
            prob = StationaryProblem(sys_, forcing_preset("static-g", grids, a))
            r = solve_stationary(prob)
            w = np.tensordot(r.beta, bases.zeta, axes=1)[2]
            lin = prob.load / sys_.kappa
            nl = np.linalg.norm(lin - r.beta) / max(np.linalg.norm(r.beta), 1e-300)
            hmin = np.linalg.eigvalsh(hessian_at(r.beta, prob)).min()
            rows.append((label, f"{a:g}", r.iterations, f"{r.residual:.1e}", f"{r.identity_residual:.1e}", f"{np.abs(w).max():.4g}", f"{nl:.3f}", f"{hmin:.3g}"))
    table(("shell", "g0", "its", "residual", "identity", "max|w|", "nonlin", "min eig H"), rows)


if __name__ == "__main__":
    main()
