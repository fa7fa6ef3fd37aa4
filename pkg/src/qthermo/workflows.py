"""Simulate, measure and event runs shared by the command line and the presets."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channels import ChannelModel, simulate, sudden_death_times
from .config import ScenarioConfig
from .errors import ValidationError
from .nonmarkov import (
    MeasureResult,
    measure_NC,
    measure_ND_blp,
    measure_NF,
    measure_NQ_entro,
    measure_NQ_ergo,
    measure_NQ_stand,
)
from .state import BlochState
from .tables import SIMULATE_COLUMNS, ledger_rows
from .thermo import accumulate_ledger, adiabatic_times, env_work_identities

DEFAULT_GRID = 1001
MEASURE_COLUMNS = ("s", "value", "opt_x", "opt_y", "opt_z", "coordinate", "intervals")
FREEZE_TOL = 1e-12


def default_horizon(model: ChannelModel) -> float:
    """Ten relaxation times when a rate is known, else 20 in units of 1/omega0."""
    if model.family == "OHMIC-PD" or not model.gamma:
        return 20.0 / (model.omega_c if model.family == "OHMIC-PD" else model.omega0)
    return 10.0 / model.gamma


def time_grid(cfg: ScenarioConfig, horizon: float | None = None, grid: int | None = None) -> np.ndarray:
    T = horizon if horizon is not None else cfg.horizon if cfg.horizon is not None else default_horizon(cfg.channel)
    n = grid if grid is not None else cfg.grid if cfg.grid is not None else DEFAULT_GRID
    if not (T > 0 and math.isfinite(T)):
        raise ValidationError(f"horizon must be a positive finite number, got {T!r}")
    if n < 2:
        raise ValidationError(f"grid must have at least 2 points, got {n}")
    return np.linspace(0.0, T, n)


# ------------------------------------------------------------------ simulate


def run_simulate(cfg: ScenarioConfig, horizon: float | None = None, grid: int | None = None):
    """Ledger table for the configured trajectory: (columns, rows, ledger)."""
    times = time_grid(cfg, horizon, grid)
    traj = simulate(cfg.channel, cfg.initial_state(), times)
    ledger = accumulate_ledger(traj)
    return SIMULATE_COLUMNS, ledger_rows(ledger), ledger


# ------------------------------------------------------------------- measure


def sweep_values(start: float, stop: float, step: float) -> list[float]:
    """start, start+step, ... up to stop inclusive; empty when stop < start."""
    if step <= 0:
        raise ValidationError(f"measure.s_step must be > 0, got {step!r}")
    if stop < start:
        return []
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(n)]


def _pure_meridian(theta: float) -> BlochState:
    return BlochState.from_spherical(1.0, theta)


def evaluate_measure(name: str, model: ChannelModel, cfg: ScenarioConfig | None = None) -> MeasureResult:
    """One measure value for one channel; witness errors propagate unchanged."""
    if name == "NC":
        return measure_NC(model)
    if name == "ND":
        return measure_ND_blp(model)
    if name == "NQ_stand":
        return measure_NQ_stand(model)
    if name in ("NQ_entro", "NQ_ergo") and model.family == "OHMIC-PD":
        return measure_NQ_entro(model) if name == "NQ_entro" else measure_NQ_ergo(model)
    if name in ("NQ_entro", "NQ_ergo"):
        return measure_NF(model, name[1:], coordinate=_pure_meridian, bounds=(0.0, math.pi))
    if name == "NF-custom":
        signal = cfg.signal if cfg is not None else None
        if not signal:
            raise ValidationError("NF-custom needs measure.signal")
        states = [cfg.initial_state()] if cfg is not None and cfg.init.given else None
        coord = None if states else _pure_meridian
        return measure_NF(model, signal, states=states, coordinate=coord, bounds=(0.0, math.pi))
    raise ValidationError(f"unknown measure {name!r}")


def _measure_row(param: float, res: MeasureResult) -> list:
    opt = res.optimizer
    if isinstance(opt, tuple):
        opt = opt[0]
    v = opt.vec if isinstance(opt, BlochState) else (math.nan,) * 3
    coord = res.coordinate if res.coordinate is not None else math.nan
    iv = ";".join(f"{a:.17g}:{b:.17g}" for a, b in res.intervals)
    return [param, res.value, *v, coord, iv]


def run_measure(cfg: ScenarioConfig):
    """Measure table: one row per s value (or a single row at the configured s)."""
    if cfg.measure is None:
        raise ValidationError("measure needs measure.name")
    sweep = any(v is not None for v in (cfg.s_start, cfg.s_stop, cfg.s_step))
    if sweep:
        if None in (cfg.s_start, cfg.s_stop, cfg.s_step):
            raise ValidationError("an s sweep needs measure.s_start, measure.s_stop and measure.s_step")
        if cfg.channel.family != "OHMIC-PD":
            raise ValidationError(f"an s sweep needs channel.family = OHMIC-PD, not {cfg.channel.family}")
        values = sweep_values(cfg.s_start, cfg.s_stop, cfg.s_step)
    else:
        values = [cfg.channel.s if cfg.channel.s is not None else math.nan]
    rows = []
    for s in values:
        model = replace(cfg.channel, s=s) if sweep else cfg.channel
        rows.append(_measure_row(s, evaluate_measure(cfg.measure, model, cfg)))
    return MEASURE_COLUMNS, rows


# -------------------------------------------------------------------- events


@dataclass
class EventReport:
    lines: list[str]
    rows: list[list]

    columns = ("event", "quantity", "value")


def _energy_u0(cfg: ScenarioConfig) -> float:
    """Initial energy in units of the field magnitude."""
    r0 = cfg.initial_state().vec
    h = cfg.channel.field_vectors(0.0)[0]
    return -float(np.dot(h, r0)) / float(np.linalg.norm(h))


def run_events(cfg: ScenarioConfig, horizon: float | None = None, grid: int | None = None) -> EventReport:
    kind = cfg.event
    if kind is None:
        raise ValidationError("events needs events.kind")
    model = cfg.channel
    if kind == "sudden_death":
        if model.family not in ("AD", "NM-AD"):
            raise ValidationError(
                f"sudden death is defined for amplitude damping (AD, NM-AD); {model.family} has no such event"
            )
        T = horizon if horizon is not None else cfg.horizon
        res = sudden_death_times(model, _energy_u0(cfg), horizon=T)
        rows = [["sudden_death", f"t_{k}", t] for k, t in enumerate(res.times, start=1)]
        if not res.occurs:
            return EventReport(["no sudden death"], [["sudden_death", "t_sd", math.nan]])
        lines = [f"t_sd = {res.t_sd:.10g}"]
        if len(res.times) > 1:
            lines.append("death/birth times: " + ", ".join(f"{t:.10g}" for t in res.times))
        return EventReport(lines, rows + [["sudden_death", "t_sd", res.t_sd]])

    times = time_grid(cfg, horizon, grid)
    traj = simulate(model, cfg.initial_state(), times)
    if kind == "adiabatic":
        if not model.static_field:
            raise ValidationError(f"adiabatic times need a static field; {model.family} drives the field in time")
        found = adiabatic_times(traj)
        rows = [["adiabatic", f"t_{k}", t] for k, t in enumerate(found.times, start=1)]
        if not found.times:
            return EventReport([f"no adiabatic time up to t = {found.horizon:g}"], [["adiabatic", "t_c", math.nan]])
        ew = env_work_identities(traj, found.first)
        lines = [
            f"t_c = {found.first:.10g}",
            "all t_n: " + ", ".join(f"{t:.10g}" for t in found.times),
            f"W* = {ew.W_star:.10g}, dE = {ew.dE:.10g}, dU_pi = {ew.dU_pi:.10g}",
        ]
        rows += [
            ["adiabatic", "t_c", ew.t_c],
            ["adiabatic", "W_star", ew.W_star],
            ["adiabatic", "dE", ew.dE],
            ["adiabatic", "dU_pi", ew.dU_pi],
        ]
        return EventReport(lines, rows)
    if kind == "freezing":
        ledger = accumulate_ledger(traj, densify=False)
        lines, rows = [], []
        for col in ("E", "E_I", "E_C"):
            series = ledger[col]
            dev = float(np.max(np.abs(series - series[0])))
            rows += [["freezing", f"{col}_0", series[0]], ["freezing", f"{col}_max_deviation", dev]]
            if col == "E":
                lines.append(_freeze_verdict("E", series[0], dev))
            elif dev < FREEZE_TOL:
                lines.append(_freeze_verdict(col, series[0], dev))
        return EventReport(lines, rows)
    raise ValidationError(f"unknown event kind {kind!r}")


def _freeze_verdict(name: str, value: float, dev: float) -> str:
    if dev < FREEZE_TOL:
        return f"{name}: frozen at {name} = {round(float(value), 12)!r}, max deviation < {FREEZE_TOL:g}"
    return f"{name}: not frozen, max deviation {dev:.3e} from {name}(0) = {value:.10g}"
