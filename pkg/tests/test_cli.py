import csv
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from qthermo import cli
from qthermo.errors import NumericalError
from qthermo.plotting import padded_range
from qthermo.presets import PRESETS
from qthermo.tables import SIMULATE_HEADER, format_value

GOLDEN_HEADER = (
    "t,x,y,z,r,U,S,C,E,E_I,E_C,Q_stand,W_stand,Q_entro,W_entro,W_star,"
    "Q_ergo,W_ergo,Q_op,T_stand,T_entro,T_ergo"
)


def run(*args, cwd=None, env=None):
    full_env = {k: v for k, v in os.environ.items() if k != cli.OUT_ENV}
    full_env.update(env or {})
    return subprocess.run(
        [sys.executable, "-m", "qthermo", *map(str, args)], capture_output=True, text=True, cwd=cwd, env=full_env
    )


def write_cfg(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# ------------------------------------------------------------------ simulate


def test_simulate_header_is_golden(tmp_path):
    cfg = write_cfg(tmp_path, "spont.cfg", "channel.family = SPONT-EMISSION\nchannel.gamma = 1\ninit.x = 1\n")
    res = run("simulate", "--config", cfg, "--out", tmp_path, "--horizon", 5, "--grid", 51)
    assert res.returncode == 0, res.stderr
    text = (tmp_path / "spont.csv").read_text()
    assert text.split("\n", 1)[0] == GOLDEN_HEADER == SIMULATE_HEADER
    header, rows = read_rows(tmp_path / "spont.csv")
    assert len(rows) == 51 and all(len(r) == len(header) for r in rows)


def test_constant_scenario_has_zero_cumulatives(tmp_path):
    # the maximally mixed state is a fixed point of dephasing
    cfg = write_cfg(tmp_path, "still.cfg", "channel.family = PD\nchannel.gamma = 1\ninit.x = 0\noutput.stem = still\n")
    assert run("simulate", "--config", cfg, "--out", tmp_path, "--grid", 21).returncode == 0
    header, rows = read_rows(tmp_path / "still.csv")
    for name in ("Q_stand", "W_stand", "Q_entro", "W_entro", "W_star", "Q_ergo", "W_ergo"):
        k = header.index(name)
        assert all(float(r[k]) == 0 for r in rows)
    k = header.index("T_ergo")
    assert all(r[k] == "inf" for r in rows)


def test_simulate_column_selection_and_config_out_dir(tmp_path):
    cfg = write_cfg(
        tmp_path,
        "sel.cfg",
        f"channel.family = AD\nchannel.gamma = 1\ninit.z = -0.5\noutput.columns = E, U\noutput.dir = {tmp_path / 'o'}\n",
    )
    assert run("simulate", "--config", cfg, "--grid", 11).returncode == 0
    header, _ = read_rows(tmp_path / "o" / "sel.csv")
    assert header == ["t", "E", "U"]


def test_format_value_sentinels():
    assert [format_value(v) for v in (math.inf, -math.inf, math.nan, -0.0)] == ["inf", "-inf", "nan", "0"]
    assert float(format_value(0.1)) == 0.1


# ------------------------------------------------------------------- measure


def ohmic_sweep_cfg(tmp_path, name, measure, start, stop, step=0.1):
    return write_cfg(
        tmp_path,
        f"{name}.cfg",
        f"channel.family = OHMIC-PD\nchannel.s = 1\nmeasure.name = {measure}\n"
        f"measure.s_start = {start}\nmeasure.s_stop = {stop}\nmeasure.s_step = {step}\n",
    )


def test_measure_sweep_nq_ergo_peaks_at_3_2(tmp_path):
    cfg = ohmic_sweep_cfg(tmp_path, "nq", "NQ_ergo", 0.5, 6)
    res = run("measure", "--config", cfg, "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    header, rows = read_rows(tmp_path / "nq.csv")
    assert header == ["s", "value", "opt_x", "opt_y", "opt_z", "coordinate", "intervals"]
    s = np.array([float(r[0]) for r in rows])
    v = np.array([float(r[1]) for r in rows])
    assert len(s) == 56
    assert np.all(v[s <= 2 + 1e-9] == 0)
    assert s[np.argmax(v)] == pytest.approx(3.2)


def test_measure_empty_sweep_writes_header_only(tmp_path):
    cfg = ohmic_sweep_cfg(tmp_path, "empty", "NC", 3, 2)
    assert run("measure", "--config", cfg, "--out", tmp_path).returncode == 0
    assert (tmp_path / "empty.csv").read_text() == "s,value,opt_x,opt_y,opt_z,coordinate,intervals\n"


def test_measure_nq_stand_is_zero(tmp_path):
    cfg = ohmic_sweep_cfg(tmp_path, "stand", "NQ_stand", 2.5, 4.5, 0.5)
    assert run("measure", "--config", cfg, "--out", tmp_path).returncode == 0
    _, rows = read_rows(tmp_path / "stand.csv")
    assert len(rows) == 5 and all(float(r[1]) == 0 for r in rows)


def test_measure_witness_inapplicable_exit_code(tmp_path):
    cfg = write_cfg(tmp_path, "bad.cfg", "channel.family = AD\nchannel.gamma = 1\nmeasure.name = NC\n")
    res = run("measure", "--config", cfg, "--out", tmp_path)
    assert res.returncode == 3
    assert "incoherent" in res.stderr
    assert not (tmp_path / "bad.csv").exists()


# -------------------------------------------------------------------- events


def test_events_examples(tmp_path):
    sd = write_cfg(tmp_path, "sd.cfg", "channel.family = AD\nchannel.gamma = 1\ninit.C0 = 0\ninit.U0 = 0.5\nevents.kind = sudden_death\n")
    res = run("events", "--config", sd, "--out", tmp_path)
    assert res.returncode == 0
    t_sd = float(res.stdout.split("t_sd = ")[1].split()[0])
    assert t_sd == pytest.approx(0.405465, abs=1e-6)

    fr = write_cfg(tmp_path, "fr.cfg", "channel.family = PD\nchannel.gamma = 1\ninit.C0 = 0\ninit.U0 = 0.5\nevents.kind = freezing\n")
    res = run("events", "--config", fr, "--out", tmp_path)
    assert res.returncode == 0
    assert "frozen at E = 1.0, max deviation < 1e-12" in res.stdout

    no = write_cfg(tmp_path, "no.cfg", "channel.family = AD\nchannel.gamma = 1\ninit.C0 = 0\ninit.U0 = -0.2\nevents.kind = sudden_death\n")
    res = run("events", "--config", no, "--out", tmp_path)
    assert res.returncode == 0 and "no sudden death" in res.stdout
    header, rows = read_rows(tmp_path / "no.csv")
    assert header == ["event", "quantity", "value"] and rows == [["sudden_death", "t_sd", "nan"]]


def test_events_adiabatic_report(tmp_path):
    cfg = write_cfg(
        tmp_path,
        "ad.cfg",
        "channel.family = SPONT-EMISSION\nchannel.gamma = 1\ninit.r0 = 1\ninit.theta0 = pi/2\nevents.kind = adiabatic\n",
    )
    res = run("events", "--config", cfg, "--out", tmp_path, "--horizon", 20, "--grid", 2001)
    assert res.returncode == 0, res.stderr
    assert res.stdout.startswith("t_c = ")
    assert "W* = " in res.stdout


def test_events_undefined_for_channel(tmp_path):
    cfg = write_cfg(tmp_path, "x.cfg", "channel.family = PD\nchannel.gamma = 1\ninit.z = 0.5\nevents.kind = sudden_death\n")
    res = run("events", "--config", cfg, "--out", tmp_path)
    assert res.returncode == 1 and "sudden death" in res.stderr


# ----------------------------------------------------------------- exit codes


def test_usage_and_config_errors_exit_1(tmp_path):
    assert run().returncode == 1
    assert run("simulate").returncode == 1
    assert run("preset", "fig9-nothing").returncode == 1
    assert run("simulate", "--config", tmp_path / "none.cfg").returncode == 1
    bad = write_cfg(tmp_path, "bad.cfg", "channel.family = AD\nchannel.gamma = x\n")
    res = run("simulate", "--config", bad)
    assert res.returncode == 1 and "line 2:" in res.stderr


def test_unwritable_output_exits_1(tmp_path):
    cfg = write_cfg(tmp_path, "a.cfg", "channel.family = AD\nchannel.gamma = 1\ninit.z = 0.5\n")
    blocker = tmp_path / "file"
    blocker.write_text("")
    res = run("simulate", "--config", cfg, "--out", blocker / "sub", "--grid", 5)
    assert res.returncode == 1 and "cannot write" in res.stderr


def test_numerical_failure_exits_2(tmp_path, monkeypatch, capsys):
    cfg = write_cfg(tmp_path, "a.cfg", "channel.family = AD\nchannel.gamma = 1\ninit.z = 0.5\n")

    def boom(*_a, **_k):
        raise NumericalError("integration failed")

    monkeypatch.setattr(cli, "run_simulate", boom)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "integration failed" in capsys.readouterr().err


# ---------------------------------------------------------------------- plot


def test_plot_errors_write_nothing(tmp_path):
    csv_path = tmp_path / "d.csv"
    csv_path.write_text("t,a\n0,1\n1,2\n")
    res = run("plot", csv_path, "--columns", "b")
    assert res.returncode == 1 and "unknown column" in res.stderr
    assert not (tmp_path / "d.svg").exists()
    empty = tmp_path / "e.csv"
    empty.write_text("")
    assert run("plot", empty, "--columns", "a").returncode == 1
    header_only = tmp_path / "h.csv"
    header_only.write_text("t,a\n")
    assert run("plot", header_only, "--columns", "a").returncode == 1
    assert not (tmp_path / "e.svg").exists() and not (tmp_path / "h.svg").exists()


def test_plot_constant_series(tmp_path):
    csv_path = tmp_path / "c.csv"
    csv_path.write_text("t,a\n" + "".join(f"{k},2\n" for k in range(5)))
    res = run("plot", csv_path, "--columns", "a")
    assert res.returncode == 0, res.stderr
    svg = (tmp_path / "c.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg
    assert padded_range(np.full(5, 2.0)) == pytest.approx((1.9, 2.1))
    assert padded_range(np.zeros(3)) == pytest.approx((-0.05, 0.05))
    assert padded_range(np.array([0.0, 1.0])) == pytest.approx((-0.05, 1.05))


def test_plot_is_deterministic(tmp_path):
    csv_path = tmp_path / "s.csv"
    csv_path.write_text("t,a,b\n" + "".join(f"{k},{math.sin(k)},{math.cos(k)}\n" for k in range(20)))
    run("plot", csv_path, "--columns", "a,b")
    first = (tmp_path / "s.svg").read_bytes()
    run("plot", csv_path, "--columns", "a,b", "--out", tmp_path / "again")
    assert (tmp_path / "again" / "s.svg").read_bytes() == first


# -------------------------------------------------------------------- presets


def test_preset_rerun_is_bit_identical(tmp_path):
    for d in ("a", "b"):
        assert run("preset", "fig6-PDM-heats", "--out", tmp_path / d).returncode == 0
    for name in ("fig6-PDM-heats.csv", "fig6-PDM-heats.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_env_var_overrides_out(tmp_path):
    res = run("preset", "fig6-GAD-temps", "--out", tmp_path / "flag", env={cli.OUT_ENV: str(tmp_path / "env")})
    assert res.returncode == 0
    assert sorted(f.name for f in (tmp_path / "env").iterdir()) == [
        "fig6-GAD-temps-minus.csv",
        "fig6-GAD-temps-minus.svg",
        "fig6-GAD-temps-plus.csv",
        "fig6-GAD-temps-plus.svg",
    ]
    assert not (tmp_path / "flag").exists()


def test_pdm_preset_heats(tmp_path):
    run("preset", "fig6-PDM-heats", "--out", tmp_path)
    header, rows = read_rows(tmp_path / "fig6-PDM-heats.csv")
    col = lambda n: np.array([float(r[header.index(n)]) for r in rows])
    assert np.all(col("Q_stand") == 0)
    q = col("Q_ergo")
    assert np.all(q[1:] > 0) and np.all(np.diff(q) > 0)


def test_sudden_death_preset_has_collapse_and_revival(tmp_path):
    run("preset", "fig5-AD-suddendeath", "--out", tmp_path)
    header, rows = read_rows(tmp_path / "fig5-AD-suddendeath.csv")
    e_i = np.array([float(r[header.index("E_I")]) for r in rows])
    zero = (e_i == 0).astype(int)
    starts = np.count_nonzero(np.diff(zero) == 1) + zero[0]
    assert starts >= 2
    res = run("plot", tmp_path / "fig5-AD-suddendeath.csv", "--columns", "E,E_I,E_C")
    assert res.returncode == 0 and (tmp_path / "fig5-AD-suddendeath.svg").exists()


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_every_preset_is_fast_and_emits_csv_and_svg(preset, tmp_path):
    t0 = time.perf_counter()
    res = run("preset", preset, "--out", tmp_path)
    elapsed = time.perf_counter() - t0
    assert res.returncode == 0, res.stderr
    assert elapsed < 60
    csvs = sorted(tmp_path.glob(f"{preset}*.csv"))
    assert csvs and sorted(tmp_path.glob(f"{preset}*.svg"))
    for path in csvs:
        header, rows = read_rows(path)
        assert rows and all(len(r) == len(header) for r in rows)
