"""Fixed scenarios with no free parameters; each writes CSV tables and SVG figures."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .channels import ChannelModel, simulate
from .errors import ValidationError
from .nonmarkov import measure_NC, measure_ND_blp, measure_NQ_entro, measure_NQ_ergo, measure_NQ_stand
from .plotting import heatmap, line_plot
from .state import BlochState
from .tables import SIMULATE_COLUMNS, ledger_rows, write_csv
from .thermo import accumulate_ledger, adiabatic_time_tc, env_work_identities
from .workflows import sweep_values

OHMIC_SWEEP = (0.5, 6.0, 0.1)
ENV_MAP_HORIZON = 20.0
ENV_MAP_GRID = 2001


@dataclass(frozen=True)
class FigurePreset:
    id: str
    summary: str
    run: Callable[[Path], list[Path]]


def _ledger_outputs(out: Path, stem: str, model: ChannelModel, r0: BlochState, times, plot_cols, extra=None, xlabel="t"):
    ledger = accumulate_ledger(simulate(model, r0, times))
    csv = write_csv(out / f"{stem}.csv", SIMULATE_COLUMNS, ledger_rows(ledger))
    series = {c: ledger[c] for c in plot_cols}
    if extra:
        series.update(extra(ledger))
    svg = line_plot(ledger.times, series, out / f"{stem}.svg", xlabel=xlabel)
    return [csv, svg], ledger


# ------------------------------------------------------------ heat and coherence


def fig4_heat_coherence(out: Path) -> list[Path]:
    model = ChannelModel("BITFLIP-DISS", gamma=0.1, omega0=1.0)
    r0 = BlochState(0.5, 0.0, 0.5)
    times = np.linspace(0.0, 60.0, 1201)
    ledger = accumulate_ledger(simulate(model, r0, times))
    csv = write_csv(out / "fig4-heat-coherence.csv", SIMULATE_COLUMNS, ledger_rows(ledger))
    dt = ledger.times
    series = {
        "dQ_entro/dt": np.gradient(ledger["Q_entro"], dt),
        "dC/dt": np.gradient(ledger["C"], dt),
        "dQ_stand/dt": np.gradient(ledger["Q_stand"], dt),
    }
    svg = line_plot(dt, series, out / "fig4-heat-coherence.svg", xlabel="t")
    return [csv, svg]


def fig4_dephasing_q(out: Path) -> list[Path]:
    times = np.linspace(0.0, 20.0, 2001)
    x0 = math.sqrt(1.0 - 0.05**2)
    r0 = BlochState(x0, 0.0, 0.05)
    cols, q = [], {}
    for s in (1.5, 3.5):
        ledger = accumulate_ledger(simulate(ChannelModel("OHMIC-PD", s=s, omega0=1.0, omega_c=1.0), r0, times))
        q[f"Q_entro s={s}"] = ledger["Q_entro"]
        cols.append(ledger["Q_entro"])
    rows = np.column_stack([times, *cols]).tolist()
    csv = write_csv(out / "fig4-dephasing-Q.csv", ("t", "Q_entro_s1.5", "Q_entro_s3.5"), rows)
    svg = line_plot(times, q, out / "fig4-dephasing-Q.svg", xlabel="omega_c t")
    return [csv, svg]


def fig4_nq_nc_sweep(out: Path) -> list[Path]:
    rows = []
    for s in sweep_values(*OHMIC_SWEEP):
        m = ChannelModel("OHMIC-PD", s=s, omega0=1.0, omega_c=1.0)
        nq = measure_NQ_entro(m)
        rows.append([s, nq.value, measure_NC(m).value, nq.coordinate if nq.coordinate is not None else math.nan])
    cols = ("s", "NQ_entro", "NC", "z_max")
    csv = write_csv(out / "fig4-NQ-NC-sweep.csv", cols, rows)
    a = np.array(rows)
    svg = line_plot(a[:, 0], {"NQ_entro": a[:, 1], "NC": a[:, 2], "z_max": a[:, 3]}, out / "fig4-NQ-NC-sweep.svg", xlabel="s")
    return [csv, svg]


# ------------------------------------------------------------------ ergotropy

_CU_STATE = BlochState(0.5, 0.0, -0.5)  # C0 = 0.5, U0 = 0.5 with h = (0, 0, 1)


def _ergotropy_pair(out: Path, stem: str, nm: ChannelModel, mk: ChannelModel, horizon: float, n: int) -> list[Path]:
    times = np.linspace(0.0, horizon, n)
    paths = []
    for tag, model in (("", nm), ("-markov", mk)):
        p, _ = _ledger_outputs(out, stem + tag, model, _CU_STATE, times, ("E", "E_I", "E_C"), xlabel="gamma t")
        paths += p
    return paths


def fig5_pd_freezing(out: Path) -> list[Path]:
    return _ergotropy_pair(
        out, "fig5-PD-freezing", ChannelModel("NM-PD", gamma=1.0, Gamma=0.01), ChannelModel("PD", gamma=1.0), 50.0, 2001
    )


def fig5_ad_suddendeath(out: Path) -> list[Path]:
    return _ergotropy_pair(
        out,
        "fig5-AD-suddendeath",
        ChannelModel("NM-AD", gamma=1.0, Gamma=0.001),
        ChannelModel("AD", gamma=1.0),
        400.0,
        8001,
    )


def env_work_map(n: int = 50, horizon: float = ENV_MAP_HORIZON, n_grid: int = ENV_MAP_GRID):
    """t_c, W*, dE and dU_pi for spontaneous emission on an n x n grid of (r0, theta0)."""
    model = ChannelModel("SPONT-EMISSION", gamma=1.0, omega0=1.0)
    times = np.linspace(0.0, horizon, n_grid)
    rs, ths = np.linspace(0.0, 1.0, n), np.linspace(0.0, math.pi, n)
    rows = []
    for th in ths:
        for r in rs:
            traj = simulate(model, BlochState.from_spherical(r, th), times)
            ew = env_work_identities(traj, adiabatic_time_tc(traj))
            if ew is None:
                rows.append([r, th, math.nan, math.nan, math.nan, math.nan])
            else:
                rows.append([r, th, ew.t_c, ew.W_star, ew.dE, ew.dU_pi])
    return ("r0", "theta0", "t_c", "W_star", "dE", "dU_pi"), rows, rs, ths


def _map_preset(out: Path, stem: str, column: str, label: str) -> list[Path]:
    cols, rows, rs, ths = env_work_map()
    csv = write_csv(out / f"{stem}.csv", cols, rows)
    z = np.array(rows)[:, cols.index(column)].reshape(len(ths), len(rs))
    svg = heatmap(rs, ths, z, out / f"{stem}.svg", "r0", "theta0", label)
    return [csv, svg]


def fig5_tc_map(out: Path) -> list[Path]:
    return _map_preset(out, "fig5-tc-map", "t_c", "gamma t_c")


def fig5_dupi_map(out: Path) -> list[Path]:
    return _map_preset(out, "fig5-dUpi-map", "dU_pi", "dU_pi / omega0")


_FAMILY_COLUMNS = ("param", "W_star", "dE", "dU_pi", "W_star_n", "dE_n", "dU_pi_n")


def _env_family(out: Path, stem: str, states: list[tuple[float, BlochState]], xlabel: str) -> list[Path]:
    markov = ChannelModel("SPONT-EMISSION", gamma=1.0, omega0=1.0)
    nm = ChannelModel("NM-AD", gamma=1.0, Gamma=0.01)
    tm, tn = np.linspace(0.0, 20.0, 2001), np.linspace(0.0, 60.0, 6001)
    rows = []
    for p, st in states:
        row = [p]
        for model, times, largest in ((markov, tm, False), (nm, tn, True)):
            traj = simulate(model, st, times)
            ew = env_work_identities(traj, adiabatic_time_tc(traj, largest=largest))
            row += [math.nan] * 3 if ew is None else [ew.W_star, ew.dE, ew.dU_pi]
        rows.append(row)
    csv = write_csv(out / f"{stem}.csv", _FAMILY_COLUMNS, rows)
    a = np.array(rows)
    svg = line_plot(a[:, 0], {c: a[:, k] for k, c in enumerate(_FAMILY_COLUMNS) if k}, out / f"{stem}.svg", xlabel=xlabel)
    return [csv, svg]


def fig5_mixedfamily(out: Path) -> list[Path]:
    rs = np.linspace(0.0, 1.0, 51)
    return _env_family(out, "fig5-mixedfamily", [(r, BlochState.from_spherical(r, math.pi / 2)) for r in rs], "r0")


def fig5_purefamily(out: Path) -> list[Path]:
    ths = np.linspace(0.0, math.pi / 2, 51)
    return _env_family(out, "fig5-purefamily", [(t, BlochState.from_spherical(1.0, t)) for t in ths], "theta0")


# ------------------------------------------------------- temperatures and heats

GAD_STATES = {"minus": BlochState(0.45, 0.0, -0.80), "plus": BlochState(0.45, 0.0, 0.80)}


def gad_model() -> ChannelModel:
    return ChannelModel("GAD-MASTER", gamma=1.0, omega0=1.0, T_e=10.0)


def fig6_gad_temps(out: Path) -> list[Path]:
    times = np.linspace(0.0, 3.0, 3001)
    paths = []
    for tag, r0 in GAD_STATES.items():
        p, _ = _ledger_outputs(
            out,
            f"fig6-GAD-temps-{tag}",
            gad_model(),
            r0,
            times,
            ("T_stand", "T_entro", "T_ergo"),
            extra=lambda lg: {"T_e": np.full(lg.times.shape, 10.0)},
            xlabel="omega0 t",
        )
        paths += p
    return paths


def fig6_pdm_heats(out: Path) -> list[Path]:
    model = ChannelModel("PD-TIMEDEP", gamma=1.0, omega=1.0, omega0=1.0)
    p, _ = _ledger_outputs(
        out,
        "fig6-PDM-heats",
        model,
        BlochState(0.5, 0.7, 0.0),
        np.linspace(0.0, 10.0, 2001),
        ("Q_ergo", "Q_op", "Q_entro", "Q_stand"),
        extra=lambda lg: {"dS": lg["S"] - lg["S"][0]},
        xlabel="omega t",
    )
    return p


def fig6_nm_sweep(out: Path) -> list[Path]:
    rows = []
    for s in sweep_values(*OHMIC_SWEEP):
        m = ChannelModel("OHMIC-PD", s=s, omega0=1.0, omega_c=1.0)
        rows.append([s, measure_NQ_ergo(m).value, measure_NQ_entro(m).value, measure_NQ_stand(m).value, measure_ND_blp(m).value])
    cols = ("s", "NQ_ergo", "NQ_entro", "NQ_stand", "ND")
    csv = write_csv(out / "fig6-NM-sweep.csv", cols, rows)
    a = np.array(rows)
    svg = line_plot(a[:, 0], {c: a[:, k] for k, c in enumerate(cols) if k}, out / "fig6-NM-sweep.svg", xlabel="s")

    times = np.linspace(0.0, 20.0, 2001)
    r0 = BlochState(0.8, 0.0, 0.0)
    temps = {}
    for s in (2.0, 3.2):
        lg = accumulate_ledger(simulate(ChannelModel("OHMIC-PD", s=s, omega0=1.0, omega_c=1.0), r0, times), densify=False)
        temps[f"T_ergo s={s}"] = lg["T_ergo"]
    inset_csv = write_csv(
        out / "fig6-NM-sweep-Tergo.csv", ("t", "T_ergo_s2.0", "T_ergo_s3.2"), np.column_stack([times, *temps.values()]).tolist()
    )
    inset_svg = line_plot(times, temps, out / "fig6-NM-sweep-Tergo.svg", xlabel="omega_c t")
    return [csv, svg, inset_csv, inset_svg]


PRESETS = {
    p.id: p
    for p in (
        FigurePreset("fig4-heat-coherence", "bit-flip dissipation: heat and coherence flows", fig4_heat_coherence),
        FigurePreset("fig4-dephasing-Q", "Ohmic dephasing: Q_entro for s = 1.5 and 3.5", fig4_dephasing_q),
        FigurePreset("fig4-NQ-NC-sweep", "Ohmic dephasing: N_Q_entro, N_C and z_max over s", fig4_nq_nc_sweep),
        FigurePreset("fig5-PD-freezing", "phase damping: ergotropy freezing", fig5_pd_freezing),
        FigurePreset("fig5-AD-suddendeath", "amplitude damping: ergotropy sudden death", fig5_ad_suddendeath),
        FigurePreset("fig5-tc-map", "spontaneous emission: t_c over (r0, theta0)", fig5_tc_map),
        FigurePreset("fig5-dUpi-map", "spontaneous emission: dU_pi over (r0, theta0)", fig5_dupi_map),
        FigurePreset("fig5-mixedfamily", "environment-induced work for theta0 = pi/2", fig5_mixedfamily),
        FigurePreset("fig5-purefamily", "environment-induced work for pure states", fig5_purefamily),
        FigurePreset("fig6-GAD-temps", "thermalization: three temperatures", fig6_gad_temps),
        FigurePreset("fig6-PDM-heats", "driven dephasing: heats and entropy change", fig6_pdm_heats),
        FigurePreset("fig6-NM-sweep", "Ohmic dephasing: heat-based measures over s", fig6_nm_sweep),
    )
}


def run_preset(preset_id: str, out: Path) -> list[Path]:
    if preset_id not in PRESETS:
        raise ValidationError(f"unknown preset {preset_id!r}; choose from {', '.join(PRESETS)}")
    return PRESETS[preset_id].run(Path(out))
