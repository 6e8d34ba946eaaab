"""Reference pulse run through the CLI, then a short summary of the written time series."""

import argparse
import sys

import numpy as np

from _common import ROOT
from vkfsi.cli_harness import main as cli
from vkfsi.cli_harness import parse_config
from vkfsi.cli_harness.io import read_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(ROOT / "configs" / "reference.ini"))
    ap.add_argument("--out", default=str(ROOT / "runs" / "reference"))
    args = ap.parse_args()
    code = cli(["simulate", "--config", args.config, "--out", args.out])
    if code:
        sys.exit(code)
    cols, data = read_csv(f"{args.out}/timeseries.csv")
    c = {k: i for i, k in enumerate(cols)}
    k = int(np.argmax(data[:, c["total"]]))
    print(f"peak energy {data[k, c['total']]:.5f} at t = {data[k, c['t']]:.3f}")
    print(f"final energy {data[-1, c['total']]:.5e}, max balance residual {data[:, c['balance_residual']].max():.3e}")
    print(f"max volume defect {data[:, c['volume_rel']].max():.2e}, max trace mismatch {data[:, c['trace_mismatch_rel']].max():.3f}")
    print(f"config: {parse_config(args.config).as_dict()['forcing']}")


if __name__ == "__main__":
    main()
