"""Command line front end: ``qthermo {simulate,measure,events,plot,preset}``.

Exit codes: 0 success, 1 usage or config error, 2 numerical failure,
3 witness not applicable to the channel.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import load_config
from .errors import QThermoError, ValidationError
from .plotting import plot_csv
from .presets import PRESETS, run_preset
from .tables import write_csv
from .workflows import run_events, run_measure, run_simulate

OUT_ENV = "QTHERMO_OUT"


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0 or v == float("inf"):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {text!r}")
    return v


def _grid(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 2:
        raise argparse.ArgumentTypeError(f"need at least 2 grid points, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help=f"output directory (overridden by ${OUT_ENV})")

    timing = argparse.ArgumentParser(add_help=False)
    timing.add_argument("--horizon", metavar="T", type=_positive_float, help="final time")
    timing.add_argument("--grid", metavar="N", type=_grid, help="number of time points")

    cfg = argparse.ArgumentParser(add_help=False)
    cfg.add_argument("--config", metavar="PATH", required=True, help="scenario file")

    p = _Parser(prog="qthermo", description="Open-system qubit thermodynamics and non-Markovianity.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[cfg, common, timing], help="write the thermodynamic ledger of a trajectory")
    sub.add_parser("measure", parents=[cfg, common], help="evaluate a non-Markovianity measure")
    sub.add_parser("events", parents=[cfg, common, timing], help="report sudden death, adiabatic times or freezing")
    pl = sub.add_parser("plot", parents=[common], help="SVG line plot of CSV columns against the first column")
    pl.add_argument("csv", help="CSV written by this tool")
    pl.add_argument("--columns", required=True, help="comma-separated column names")
    pr = sub.add_parser("preset", parents=[common], help="run a fixed figure scenario")
    pr.add_argument("id", choices=sorted(PRESETS), metavar="ID", help=", ".join(PRESETS))
    return p


def _out_dir(args, cfg=None) -> Path:
    env = os.environ.get(OUT_ENV)
    if env:
        return Path(env)
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.out_dir:
        return Path(cfg.out_dir)
    return Path(".")


def _run(args) -> list[str]:
    if args.command == "plot":
        columns = [c.strip() for c in args.columns.split(",") if c.strip()]
        out = None
        if args.out or os.environ.get(OUT_ENV):
            out = _out_dir(args) / Path(args.csv).with_suffix(".svg").name
        return [f"wrote {plot_csv(args.csv, columns, out)}"]
    if args.command == "preset":
        return [f"wrote {p}" for p in run_preset(args.id, _out_dir(args))]

    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    stem = cfg.stem or Path(args.config).stem
    if args.command == "simulate":
        cols, rows, ledger = run_simulate(cfg, args.horizon, args.grid)
        if cfg.columns:
            unknown = [c for c in cfg.columns if c not in cols]
            if unknown:
                raise ValidationError(f"output.columns: unknown column(s) {', '.join(unknown)}")
            idx = [0] + [cols.index(c) for c in cfg.columns if c != cols[0]]
            cols = tuple(cols[k] for k in idx)
            rows = [[row[k] for k in idx] for row in rows]
        lines = [f"wrote {write_csv(out / f'{stem}.csv', cols, rows)}"]
        return lines + [f"note: {n}" for n in ledger.notes]
    if args.command == "measure":
        cols, rows = run_measure(cfg)
        path = write_csv(out / f"{stem}.csv", cols, rows)
        lines = [f"{cfg.measure} s={row[0]:g}: {row[1]:.10g}" for row in rows]
        return lines + [f"wrote {path}"]
    report = run_events(cfg, args.horizon, args.grid)
    path = write_csv(out / f"{stem}.csv", report.columns, report.rows)
    return report.lines + [f"wrote {path}"]


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        lines = _run(args)
    except QThermoError as exc:
        print(f"qthermo: error: {exc}", file=sys.stderr)
        return exc.exit_code
    for line in lines:
        print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())
