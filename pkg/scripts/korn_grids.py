"""Korn probe of the in-plane form on a sequence of shell grids."""

import argparse

from _common import table
from vkfsi.domain_grid import ShellGrid
from vkfsi.shell_mechanics import PhysicalParams, korn_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", default="16,24,32,48")
    ap.add_argument("--modes", type=int, default=8)
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--mu", type=float, default=0.3)
    args = ap.parse_args()
    p = PhysicalParams(mu=args.mu)
    rows = []
    for k in (int(x) for x in args.grids.split(",")):
        r = korn_probe(p, ShellGrid(1.0, 1.0, k, k), n=args.modes, samples=args.samples)
        rows.append((k, f"{r.lam_min:.5f}", f"{r.constant:.5f}"))
    table(("shell n", "lam_min", "C sampled"), rows)


if __name__ == "__main__":
    main()
