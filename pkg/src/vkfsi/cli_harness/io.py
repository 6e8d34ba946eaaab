"""Output files: time-series CSV, binary snapshots with JSON headers, manifest, basis cache."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from ..coupled_galerkin import Bases
from ..domain_grid import Grids, MeanCarrier
from ..shell_mechanics import PhysicalParams, ShellBasis
from ..stokes_flow import StokesBasis

DTYPE_TAG = "<f8"


class CacheMismatch(RuntimeError):
    pass


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def _fmt(x) -> str:
    return repr(float(x))


def write_csv(path: Path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(columns)]
    lines += [",".join(_fmt(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    lines = Path(path).read_text().splitlines()
    cols = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(cols))
    return cols, data


# --------------------------------------------------------------------------- array blobs


def write_blob(stem: Path, arrays: dict, meta: dict | None = None) -> list[Path]:
    """``stem.bin`` holds the arrays back to back as little-endian float64; ``stem.json`` describes them."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    entries, chunks, offset = [], [], 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(np.asarray(arrays[name], dtype=DTYPE_TAG))
        b = a.tobytes()
        entries.append({"name": name, "shape": list(a.shape), "dtype": DTYPE_TAG, "offset": offset, "nbytes": len(b), "sha256": sha256_bytes(b)})
        chunks.append(b)
        offset += len(b)
    blob = b"".join(chunks)
    binp = stem.with_suffix(".bin")
    binp.write_bytes(blob)
    header = {"arrays": entries, "sha256": sha256_bytes(blob), "meta": meta or {}}
    jsp = stem.with_suffix(".json")
    jsp.write_text(json.dumps(header, indent=1, sort_keys=True) + "\n")
    return [binp, jsp]


def read_blob(stem: Path) -> tuple[dict, dict]:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    blob = stem.with_suffix(".bin").read_bytes()
    if sha256_bytes(blob) != header["sha256"]:
        raise CacheMismatch(f"checksum mismatch in {stem.with_suffix('.bin')}")
    out = {}
    for e in header["arrays"]:
        raw = blob[e["offset"] : e["offset"] + e["nbytes"]]
        if sha256_bytes(raw) != e["sha256"]:
            raise CacheMismatch(f"checksum mismatch for array {e['name']!r}")
        out[e["name"]] = np.frombuffer(raw, dtype=e["dtype"]).reshape(e["shape"]).copy()
    return out, header["meta"]


def write_manifest(directory: Path, files) -> Path:
    directory = Path(directory)
    items = []
    for f in sorted(set(Path(p) for p in files)):
        # files outside the output directory (a shared basis cache) keep a relative path with ".."
        items.append({"file": os.path.relpath(f, directory), "bytes": f.stat().st_size, "sha256": sha256_file(f)})
    path = directory / "manifest.json"
    path.write_text(json.dumps({"files": items}, indent=1, sort_keys=True) + "\n")
    return path


# --------------------------------------------------------------------------- basis cache


def basis_key(grids: Grids, params: PhysicalParams, m: int, n: int) -> dict:
    d = grids.domain
    return {
        "box": [d.lx, d.ly, d.hz],
        "fluid": [d.nx, d.ny, d.nz],
        "shell": [grids.shell.nx, grids.shell.ny],
        "m": m,
        "n": n,
        "alpha": params.alpha,
        "mu": params.mu,
    }


def save_bases(path: Path, bases: Bases, params: PhysicalParams) -> list[Path]:
    arrays = {
        "psi": bases.stokes.psi,
        "mu": bases.stokes.mu,
        "xi": bases.transversal.modes,
        "kappa_hat": bases.transversal.values,
        "eta": bases.inplane.modes,
        "kappa_tilde": bases.inplane.values,
        "phi": bases.phi,
        "carrier": bases.carrier.e,
    }
    meta = {"key": basis_key(bases.grids, params, bases.m, bases.n), "carrier_mass": bases.carrier.mass}
    return write_blob(Path(path), arrays, meta)


def load_bases(path: Path, grids: Grids, params: PhysicalParams, m: int, n: int) -> Bases:
    path = Path(path)
    arrays, meta = read_blob(path)
    want = basis_key(grids, params, m, n)
    if meta.get("key") != json.loads(json.dumps(want)):
        diff = sorted(k for k in want if meta.get("key", {}).get(k) != json.loads(json.dumps(want[k])))
        raise CacheMismatch(f"basis cache {path} was built for a different setup (differs in: {', '.join(diff)})")
    return Bases(
        grids=grids,
        m=m,
        n=n,
        alpha=params.alpha,
        mu=params.mu,
        stokes=StokesBasis(arrays["psi"], arrays["mu"]),
        transversal=ShellBasis(arrays["xi"], arrays["kappa_hat"]),
        inplane=ShellBasis(arrays["eta"], arrays["kappa_tilde"]),
        phi=arrays["phi"],
        carrier=MeanCarrier(arrays["carrier"], float(meta["carrier_mass"])),
    )
