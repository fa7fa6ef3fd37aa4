"""Scenario files: flat ``section.key = value`` lines with ``#`` comments.

Grammar (one entry per line)::

    line   := blank | comment | entry
    entry  := key "=" value [comment]
    key    := section "." name          (see KEYS for the accepted set)
    value  := number | "pi" | number "*pi" | "pi/" number | word | word,word,...
    comment:= "#" anything

Whitespace around keys and values is ignored.  Numbers are Python float
literals.  Each key may appear once.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .channels import ChannelModel
from .errors import ConfigError, ValidationError
from .state import BlochState

CHANNEL_KEYS = ("family", "gamma", "Gamma", "omega0", "omega", "omega_c", "s", "T_e", "p", "a")
INIT_KEYS = ("x", "y", "z", "r0", "theta0", "phi0", "C0", "U0")
MEASURES = ("ND", "NC", "NQ_entro", "NQ_ergo", "NQ_stand", "NF-custom")
EVENTS = ("sudden_death", "adiabatic", "freezing")

KEYS = (
    *(f"channel.{k}" for k in CHANNEL_KEYS),
    *(f"init.{k}" for k in INIT_KEYS),
    "time.horizon",
    "time.grid",
    "measure.name",
    "measure.signal",
    "measure.s_start",
    "measure.s_stop",
    "measure.s_step",
    "events.kind",
    "output.dir",
    "output.stem",
    "output.columns",
)
_TEXT_KEYS = {"channel.family", "measure.name", "measure.signal", "events.kind", "output.dir", "output.stem"}
_INT_KEYS = {"time.grid"}
_LIST_KEYS = {"output.columns"}

_PI = re.compile(r"^(?:(?P<mul>[-+0-9.eE]+)\s*\*\s*)?pi(?:\s*/\s*(?P<div>[-+0-9.eE]+))?$")


def _number(text: str, line: int) -> float:
    m = _PI.match(text)
    try:
        if m:
            v = math.pi * float(m["mul"] or 1.0) / float(m["div"] or 1.0)
        else:
            v = float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}", line) from None
    if not math.isfinite(v):
        raise ConfigError(f"value must be finite: {text!r}", line)
    return v


@dataclass(frozen=True)
class InitSpec:
    """Initial state as Cartesian (x, y, z), spherical (r0, theta0, phi0) or (C0, U0)."""

    x: float | None = None
    y: float | None = None
    z: float | None = None
    r0: float | None = None
    theta0: float | None = None
    phi0: float | None = None
    C0: float | None = None
    U0: float | None = None

    @property
    def given(self) -> bool:
        return any(getattr(self, f.name) is not None for f in fields(self))

    def form(self) -> str:
        cart = any(v is not None for v in (self.x, self.y, self.z))
        sph = any(v is not None for v in (self.r0, self.theta0, self.phi0))
        cu = any(v is not None for v in (self.C0, self.U0))
        if cart + sph + cu != 1:
            raise ValidationError("give the initial state in exactly one form: x/y/z, r0/theta0/phi0 or C0/U0")
        return "cartesian" if cart else "spherical" if sph else "energy"

    def state(self, model: ChannelModel) -> BlochState:
        form = self.form()
        if form == "cartesian":
            return BlochState(self.x or 0.0, self.y or 0.0, self.z or 0.0)
        if form == "spherical":
            if self.r0 is None or self.theta0 is None:
                raise ValidationError("spherical initial state needs init.r0 and init.theta0")
            return BlochState.from_spherical(self.r0, self.theta0, self.phi0 or 0.0)
        hz = model.field_vectors(0.0)[0, 2]
        if hz == 0:
            raise ValidationError("C0/U0 need a nonzero field at t = 0")
        return BlochState(self.C0 or 0.0, 0.0, -(self.U0 or 0.0) / hz)


@dataclass(frozen=True)
class ScenarioConfig:
    channel: ChannelModel
    init: InitSpec = InitSpec()
    horizon: float | None = None
    grid: int | None = None
    measure: str | None = None
    signal: str | None = None
    s_start: float | None = None
    s_stop: float | None = None
    s_step: float | None = None
    event: str | None = None
    out_dir: str | None = None
    stem: str | None = None
    columns: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.horizon is not None and self.horizon <= 0:
            raise ValidationError(f"time.horizon must be > 0, got {self.horizon!r}")
        if self.grid is not None and self.grid < 2:
            raise ValidationError(f"time.grid must be >= 2, got {self.grid!r}")
        if self.measure is not None and self.measure not in MEASURES:
            raise ValidationError(f"measure.name must be one of {', '.join(MEASURES)}")
        if self.event is not None and self.event not in EVENTS:
            raise ValidationError(f"events.kind must be one of {', '.join(EVENTS)}")
        if self.init.given:
            self.init.form()

    def initial_state(self) -> BlochState:
        if not self.init.given:
            raise ValidationError("this command needs an initial state (init.*)")
        return self.init.state(self.channel)


_FIELD_OF_KEY = {
    "time.horizon": "horizon",
    "time.grid": "grid",
    "measure.name": "measure",
    "measure.signal": "signal",
    "measure.s_start": "s_start",
    "measure.s_stop": "s_stop",
    "measure.s_step": "s_step",
    "events.kind": "event",
    "output.dir": "out_dir",
    "output.stem": "stem",
    "output.columns": "columns",
}


def parse_config(text: str) -> ScenarioConfig:
    entries: dict[str, tuple[object, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first on line {entries[key][1]})", lineno)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno)
        if key in _TEXT_KEYS:
            parsed: object = value
        elif key in _LIST_KEYS:
            parsed = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in _INT_KEYS:
            try:
                parsed = int(value)
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {value!r}", lineno) from None
        else:
            parsed = _number(value, lineno)
        entries[key] = (parsed, lineno)

    if "channel.family" not in entries:
        raise ConfigError("missing required key 'channel.family'")

    def build(what, make):
        lines = [ln for _, ln in entries.values()]
        try:
            return make()
        except ConfigError:
            raise
        except ValidationError as exc:
            # point at the first line of the offending section
            section = [ln for k, (_, ln) in entries.items() if k.startswith(what)]
            raise ConfigError(str(exc), min(section or lines)) from None

    channel = build(
        "channel.",
        lambda: ChannelModel(**{k.split(".", 1)[1]: v for k, (v, _) in entries.items() if k.startswith("channel.")}),
    )
    init = InitSpec(**{k.split(".", 1)[1]: v for k, (v, _) in entries.items() if k.startswith("init.")})
    extra = {_FIELD_OF_KEY[k]: v for k, (v, _) in entries.items() if k in _FIELD_OF_KEY}
    return build("", lambda: ScenarioConfig(channel=channel, init=init, **extra))


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical text form; ``parse_config(serialize_config(c)) == c``."""
    lines = []
    for name in CHANNEL_KEYS:
        v = getattr(cfg.channel, name)
        if v is not None:
            lines.append(f"channel.{name} = {_fmt(v)}")
    for name in INIT_KEYS:
        v = getattr(cfg.init, name)
        if v is not None:
            lines.append(f"init.{name} = {_fmt(v)}")
    for key, attr in _FIELD_OF_KEY.items():
        v = getattr(cfg, attr)
        if v is not None:
            lines.append(f"{key} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def with_s(cfg: ScenarioConfig, s: float) -> ScenarioConfig:
    return replace(cfg, channel=replace(cfg.channel, s=s))
