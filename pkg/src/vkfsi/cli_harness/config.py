"""INI-style run configuration (``key = value`` in sections), with defaults for the reference setup."""

from __future__ import annotations

import configparser
import difflib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..coupled_galerkin import ForcingSpec, forcing_preset
from ..domain_grid import Grids, build_domain
from ..shell_mechanics import PhysicalParams


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


@dataclass
class DomainConfig:
    lx: float = 1.0
    ly: float = 1.0
    hz: float = 0.5
    nx: int = 12
    ny: int = 12
    nz: int = 8
    shell_nx: int = 24
    shell_ny: int = 24


@dataclass
class ParamsConfig:
    nu: float = 0.1
    gamma: float = 0.5
    alpha: float = 0.01
    rho: float = 1.0
    mu: float = 0.3
    curvature: str = "zero"  # zero | constant
    k1: float = 0.5
    k2: float = 0.3


@dataclass
class ModesConfig:
    m: int = 8
    n: int = 8


FORCING_PRESETS = ("zero", "static-g", "pulse")
DEFAULT_AMPLITUDE = {"zero": 0.0, "static-g": 1000.0, "pulse": 100.0}


@dataclass
class ForcingConfig:
    preset: str = "pulse"
    amplitude: float | None = None
    t_on: float = 0.25
    stationary_compatible: bool | None = None


@dataclass
class TimeConfig:
    t_end: float = 1.0
    dt: float | None = 1e-3  # None: automatic from the stability estimate
    scheme: str = "rk4"
    stride: int = 10


@dataclass
class OutputConfig:
    dir: str = "runs/reference"
    snapshot_every: int = 0  # in samples; 0 disables snapshots
    cache: str = ""  # basis cache stem (.bin/.json); empty: <dir>/basis


@dataclass
class RunSection:
    seed: int = 0


@dataclass
class RunConfig:
    domain: DomainConfig = field(default_factory=DomainConfig)
    params: ParamsConfig = field(default_factory=ParamsConfig)
    modes: ModesConfig = field(default_factory=ModesConfig)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    run: RunSection = field(default_factory=RunSection)

    # builders ---------------------------------------------------------------
    def grids(self) -> Grids:
        d = self.domain
        return Grids(build_domain(d.lx, d.ly, d.hz, d.nx, d.ny, d.nz), d.shell_nx, d.shell_ny)

    def physical(self) -> PhysicalParams:
        p = self.params
        k1, k2 = (p.k1, p.k2) if p.curvature == "constant" else (0.0, 0.0)
        return PhysicalParams(nu=p.nu, gamma=p.gamma, alpha=p.alpha, rho=p.rho, mu=p.mu, k1=k1, k2=k2)

    def forcing_spec(self, grids: Grids) -> ForcingSpec:
        f = self.forcing
        amp = DEFAULT_AMPLITUDE[f.preset] if f.amplitude is None else f.amplitude
        return forcing_preset(f.preset, grids, amplitude=amp, t_on=f.t_on)

    @property
    def cache_path(self) -> Path:
        return Path(self.output.cache) if self.output.cache else Path(self.output.dir) / "basis"

    def as_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "domain": DomainConfig,
    "params": ParamsConfig,
    "modes": ModesConfig,
    "forcing": ForcingConfig,
    "time": TimeConfig,
    "output": OutputConfig,
    "run": RunSection,
}


# spelled-out names of the short parameter keys
_SYNONYMS = {"viscosity": "nu", "damping": "gamma", "rotational_inertia": "alpha", "density": "rho", "poisson": "mu"}


def _suggest(word: str, options) -> str:
    close = difflib.get_close_matches(word, list(options), n=1)
    if not close:
        syn = difflib.get_close_matches(word.lower(), list(_SYNONYMS), n=1)
        close = [_SYNONYMS[syn[0]]] if syn and _SYNONYMS[syn[0]] in options else []
    return f" (did you mean {close[0]!r}?)" if close else ""


def _convert(key: str, raw: str, typ: str):
    raw = raw.strip()
    optional = "None" in typ
    if optional and raw.lower() in ("", "none", "auto"):
        return None
    try:
        if typ.startswith("float"):
            return float(raw)
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("bool"):
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(key, f"cannot parse {raw!r} as {typ.split(' ')[0]}") from None
    return raw


def _validate(cfg: RunConfig):
    d = cfg.domain
    for k in ("lx", "ly", "hz"):
        if getattr(d, k) <= 0:
            raise ConfigError(f"domain.{k}", "must be positive")
    for k in ("nx", "ny", "nz"):
        if getattr(d, k) < 4:
            raise ConfigError(f"domain.{k}", "must be at least 4")
    if d.shell_nx % d.nx:
        raise ConfigError("domain.shell_nx", f"must be a multiple of domain.nx = {d.nx}")
    if d.shell_ny % d.ny:
        raise ConfigError("domain.shell_ny", f"must be a multiple of domain.ny = {d.ny}")
    p = cfg.params
    if p.nu <= 0:
        raise ConfigError("params.nu", "must be positive")
    if p.gamma < 0:
        raise ConfigError("params.gamma", "must be non-negative")
    if p.alpha <= 0:
        raise ConfigError("params.alpha", "must be positive")
    if p.rho < 0:
        raise ConfigError("params.rho", "must be non-negative")
    if not 0 < p.mu < 0.5:
        raise ConfigError("params.mu", "must lie in (0, 1/2)")
    if p.curvature not in ("zero", "constant"):
        raise ConfigError("params.curvature", f"unknown preset {p.curvature!r}{_suggest(p.curvature, ('zero', 'constant'))}")
    m = cfg.modes
    if m.m < 1:
        raise ConfigError("modes.m", "must be at least 1")
    if m.n < 1:
        raise ConfigError("modes.n", "must be at least 1")
    f = cfg.forcing
    if f.preset not in FORCING_PRESETS:
        raise ConfigError("forcing.preset", f"unknown preset {f.preset!r}{_suggest(f.preset, FORCING_PRESETS)}")
    if f.t_on <= 0:
        raise ConfigError("forcing.t_on", "must be positive")
    actual = f.preset != "pulse"
    if f.stationary_compatible is not None and f.stationary_compatible != actual:
        raise ConfigError("forcing.stationary_compatible", f"preset {f.preset!r} is {'' if actual else 'not '}stationary-compatible")
    t = cfg.time
    if t.dt is not None and not t.dt > 0:
        raise ConfigError("time.dt", "must be positive")
    if t.t_end < 0:
        raise ConfigError("time.t_end", "must be non-negative")
    if t.t_end > 0 and t.dt is not None and t.t_end < t.dt:
        raise ConfigError("time.t_end", "must be 0 or at least dt")
    if t.scheme not in ("rk4", "cn-extrap"):
        raise ConfigError("time.scheme", f"unknown scheme {t.scheme!r}{_suggest(t.scheme, ('rk4', 'cn-extrap'))}")
    if t.stride < 1:
        raise ConfigError("time.stride", "must be at least 1")
    if cfg.output.snapshot_every < 0:
        raise ConfigError("output.snapshot_every", "must be non-negative")


def parse_config_text(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", f"malformed file: {exc}") from None
    cfg = RunConfig()
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise ConfigError(sec, f"unknown section{_suggest(sec, _SECTIONS)}")
        target = getattr(cfg, sec)
        types = {f.name: str(f.type) for f in fields(target)}
        for key, raw in cp.items(sec):
            full = f"{sec}.{key}"
            if key not in types:
                raise ConfigError(full, f"unknown key{_suggest(key, types)}")
            setattr(target, key, _convert(full, raw, types[key]))
    _validate(cfg)
    return cfg


def parse_config(path: str | Path | None) -> RunConfig:
    if path is None:
        cfg = RunConfig()
        _validate(cfg)
        return cfg
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config_text(text)


def validate(cfg: RunConfig) -> RunConfig:
    _validate(cfg)
    return cfg
