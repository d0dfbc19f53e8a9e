"""Run configuration: a flat `key = value` text format.

Lines hold one assignment each, `#` starts a comment, unknown keys are
rejected, and every constraint violation is reported with the line number
where the offending value was set.  serialize/parse round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .physics import MobilityCase, PhysParams

SCENARIOS = ("rounded_square", "two_bubbles", "vortex_only")

_DEFAULT_T_END = {"rounded_square": 2.0, "two_bubbles": 2.5, "vortex_only": 1.0}


@dataclass
class RunConfig:
    scenario: str = ""
    nx: int = 64
    ny: int = 64
    eps: float = 0.05
    gamma: float = 0.1
    m0: float = 1.0
    mobility_case: str = "I"
    s_stab: float = 2.0
    eta1: float = 1.0
    eta2: float = 1.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    b: float = 1.0
    dt: float = 0.01
    t_end: float = -1.0          # -1: use the scenario default
    output_dir: str = "out"
    snapshot_every: int = 50
    tol_ch: float = 1e-12
    tol_current: float = 1e-12
    tol_ns: float = 1e-11
    abort_on_energy_increase: bool = True

    def resolved_t_end(self) -> float:
        return _DEFAULT_T_END[self.scenario] if self.t_end <= 0.0 else self.t_end

    def n_steps(self) -> int:
        return int(round(self.resolved_t_end() / self.dt))

    def phys_params(self) -> PhysParams:
        return PhysParams(
            eps=self.eps,
            gamma=self.gamma,
            mobility=MobilityCase(self.mobility_case, self.m0),
            s_stab=self.s_stab,
            eta1=self.eta1,
            eta2=self.eta2,
            sigma1=self.sigma1,
            sigma2=self.sigma2,
            b=self.b,
        )


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str, lineno: int):
    ftype = _FIELD_TYPES[key]
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "bool":
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(
            f"line {lineno}: cannot parse {raw!r} as {ftype} for key {key!r}"
        ) from None


def _validate(cfg: RunConfig, lines: dict) -> None:
    def fail(key, message):
        where = f"line {lines[key]}: " if key in lines else ""
        raise ConfigError(f"{where}{message}")

    if not cfg.scenario:
        raise ConfigError("scenario missing")
    if cfg.scenario not in SCENARIOS:
        fail("scenario", f"unknown scenario {cfg.scenario!r}, expected one of {SCENARIOS}")
    if cfg.nx < 4 or cfg.ny < 4:
        fail("nx" if cfg.nx < 4 else "ny", "grid needs nx >= 4 and ny >= 4")
    for key in ("eps", "gamma", "m0", "eta1", "eta2", "sigma1", "sigma2", "dt"):
        if not getattr(cfg, key) > 0.0:
            fail(key, f"{key} must be > 0")
    if cfg.s_stab < 0.0:
        fail("s_stab", "s_stab must be >= 0")
    if cfg.mobility_case not in ("I", "II", "III"):
        fail("mobility_case", "mobility_case must be I, II or III")
    if cfg.resolved_t_end() <= 0.0:
        fail("t_end", "t_end must be > 0")
    if cfg.snapshot_every < 1:
        fail("snapshot_every", "snapshot_every must be >= 1")
    for key in ("tol_ch", "tol_current", "tol_ns"):
        if not getattr(cfg, key) > 0.0:
            fail(key, f"{key} must be > 0")


def parse_config(path) -> RunConfig:
    """Parse and validate a configuration file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    cfg = RunConfig()
    lines = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = text.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if not value:
            raise ConfigError(f"line {lineno}: empty value for key {key!r}")
        setattr(cfg, key, _convert(key, value, lineno))
        lines[key] = lineno
    _validate(cfg, lines)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) reproduces cfg exactly."""
    out = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if f.type == "float":
            out.append(f"{f.name} = {v!r}")
        else:
            out.append(f"{f.name} = {v}")
    return "\n".join(out) + "\n"
