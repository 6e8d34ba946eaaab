"""Shared setup for the experiment scripts: reference config, cached bases, small table printer."""

from __future__ import annotations

import sys
from pathlib import Path

from vkfsi.cli_harness import parse_config
from vkfsi.cli_harness.main import obtain_bases

ROOT = Path(__file__).resolve().parents[1]


def reference(config: str | None = None):
    """(cfg, grids, params, bases) for a config file, default configs/reference.ini."""
    cfg = parse_config(config or ROOT / "configs" / "reference.ini")
    if not Path(cfg.output.dir).is_absolute():
        cfg.output.dir = str(ROOT / cfg.output.dir)
    if cfg.output.cache and not Path(cfg.output.cache).is_absolute():
        cfg.output.cache = str(ROOT / cfg.output.cache)
    grids, params = cfg.grids(), cfg.physical()
    bases, _ = obtain_bases(cfg, grids, params)
    return cfg, grids, params, bases


def table(header, rows, out=sys.stdout):
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) for i, h in enumerate(header)]
    print("  ".join(str(h).rjust(w) for h, w in zip(header, widths)), file=out)
    for r in rows:
        print("  ".join(str(v).rjust(w) for v, w in zip(r, widths)), file=out)
