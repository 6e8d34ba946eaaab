import json

import numpy as np
import pytest

from vkfsi.cli_harness import ConfigError, RunConfig, main, parse_config, parse_config_text
from vkfsi.cli_harness.io import CacheMismatch, read_blob, read_csv, sha256_file, write_blob
from vkfsi.diagnostics_energy import CSV_COLUMNS

SMALL = """
[domain]
nx = 4
ny = 4
nz = 4
shell_nx = 8
shell_ny = 8

[modes]
m = 3
n = 3

[time]
t_end = {t_end}
dt = 0.002
stride = 5

[output]
dir = {out}
"""


def small_config(tmp_path, t_end=0.02, extra=""):
    path = tmp_path / "run.ini"
    path.write_text(SMALL.format(t_end=t_end, out=tmp_path / "out") + extra)
    return path


def test_defaults_are_reference_setup():
    cfg = parse_config(None)
    assert (cfg.domain.nx, cfg.domain.nz, cfg.domain.shell_nx) == (12, 8, 24)
    assert (cfg.modes.m, cfg.modes.n) == (8, 8)
    assert cfg.forcing.preset == "pulse" and cfg.time.scheme == "rk4"
    assert isinstance(cfg, RunConfig)


@pytest.mark.parametrize(
    "text,key",
    [
        ("[time]\ndt = 0\n", "time.dt"),
        ("[time]\ndt = -1\n", "time.dt"),
        ("[time]\ndt = fast\n", "time.dt"),
        ("[params]\nmu = 0.7\n", "params.mu"),
        ("[forcing]\npreset = wind\n", "forcing.preset"),
        ("[domain]\nnx = 5\n", "domain.shell_nx"),
        ("[forcing]\npreset = pulse\nstationary_compatible = true\n", "forcing.stationary_compatible"),
    ],
)
def test_bad_values_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text)
    assert info.value.key == key


def test_unknown_key_gets_suggestion():
    with pytest.raises(ConfigError) as info:
        parse_config_text("[params]\nviscocity = 0.1\n")
    assert info.value.key == "params.viscocity"
    with pytest.raises(ConfigError, match="did you mean 'params'"):
        parse_config_text("[parms]\nnu = 0.1\n")


def test_dt_auto_parses_to_none():
    assert parse_config_text("[time]\ndt = auto\n").time.dt is None


def test_blob_round_trip_and_corruption(tmp_path, rng):
    arrays = {"a": rng.standard_normal((3, 4)), "b": np.arange(5.0)}
    files = write_blob(tmp_path / "x", arrays, {"t": 0.5})
    out, meta = read_blob(tmp_path / "x")
    assert meta == {"t": 0.5}
    for k in arrays:
        np.testing.assert_array_equal(out[k], arrays[k])
    data = bytearray(files[0].read_bytes())
    data[3] ^= 1
    files[0].write_bytes(bytes(data))
    with pytest.raises(CacheMismatch):
        read_blob(tmp_path / "x")


def test_simulate_writes_outputs(tmp_path):
    assert main(["simulate", "--config", str(small_config(tmp_path))]) == 0
    out = tmp_path / "out"
    cols, data = read_csv(out / "timeseries.csv")
    assert tuple(cols) == CSV_COLUMNS
    assert data.shape == (3, len(CSV_COLUMNS))
    np.testing.assert_allclose(data[:, 0], [0.0, 0.01, 0.02])
    man = json.loads((out / "manifest.json").read_text())
    for item in man["files"]:
        assert sha256_file(out / item["file"]) == item["sha256"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["steps"] == 10 and summary["balance_residual"] < 1e-3


def test_zero_end_time_writes_header_only(tmp_path):
    assert main(["simulate", "--config", str(small_config(tmp_path, t_end=0))]) == 0
    text = (tmp_path / "out" / "timeseries.csv").read_text().splitlines()
    assert text == [",".join(CSV_COLUMNS)]


def test_mismatched_cache_is_refused(tmp_path, capsys):
    cfg = small_config(tmp_path)
    assert main(["basis", "--config", str(cfg)]) == 0
    assert main(["simulate", "--config", str(cfg), "--modes", "4,3"]) == 4
    assert "cache mismatch" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    cfg = small_config(tmp_path, extra="\n[params]\nviscocity = 1\n")
    assert main(["simulate", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "params.viscocity" in err and "did you mean 'nu'" in err
    assert main(["simulate", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["simulate", "--config", str(small_config(tmp_path)), "--modes", "x"]) == 2


def test_stationary_command(tmp_path):
    cfg = small_config(tmp_path, extra="\n[forcing]\npreset = static-g\namplitude = 50\n")
    assert main(["stationary", "--config", str(cfg)]) == 0
    s = json.loads((tmp_path / "out" / "stationary_summary.json").read_text())
    assert s["converged"] and s["residual"] <= 1e-9
    arrays, meta = read_blob(tmp_path / "out" / "stationary")
    assert arrays["u"].shape == (3, 9, 9) and meta["converged"]
    assert main(["stationary", "--config", str(small_config(tmp_path))]) == 2


def test_verify_subset(tmp_path):
    cfg = small_config(tmp_path)
    code = main(["verify", "--config", str(cfg), "--check", "shell_mechanics.hooke_closure", "--check", "stationary_solver.zero_load_zero_solution"])
    assert code == 0
    report = (tmp_path / "out" / "verify_report.txt").read_text()
    assert "2/2 checks passed" in report


def test_simulate_is_bit_reproducible(tmp_path):
    outs = []
    for run in ("a", "b"):
        ini = tmp_path / f"{run}.ini"
        ini.write_text(SMALL.format(t_end=0.02, out=tmp_path / run))
        assert main(["simulate", "--config", str(ini)]) == 0
        outs.append((tmp_path / run / "timeseries.csv").read_bytes())
    assert outs[0] == outs[1]
