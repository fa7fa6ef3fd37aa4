"""CSV output with a fixed column order and round-trippable floats."""
from __future__ import annotations

import csv
import io
import math
import os
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import OutputError, ValidationError
from .thermo import LEDGER_COLUMNS, ThermoLedger

SIMULATE_COLUMNS = ("t", "x", "y", "z", "r", *LEDGER_COLUMNS)
SIMULATE_HEADER = ",".join(SIMULATE_COLUMNS)


def format_value(v) -> str:
    """17 significant digits; infinities and NaN as inf, -inf, nan; signed zero as 0."""
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == 0.0:
        return "0"
    return format(v, ".17g")


def render_csv(columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path: str | Path, columns: Sequence[str], rows) -> Path:
    """Render fully, then write via a temporary file so a failed run leaves nothing behind."""
    path = Path(path)
    text = render_csv(columns, rows)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path


def ledger_rows(ledger: ThermoLedger) -> list[list[float]]:
    r = ledger.vectors
    rad = np.linalg.norm(r, axis=1)
    cols = [ledger.times, r[:, 0], r[:, 1], r[:, 2], rad] + [ledger[c] for c in LEDGER_COLUMNS]
    return np.column_stack(cols).tolist()


def read_csv(path: str | Path) -> tuple[list[str], dict[str, np.ndarray]]:
    """Header and float columns of a CSV written by this package."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from None
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows:
        raise ValidationError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    data: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        try:
            data[name] = np.array([float(row[j]) if row[j] != "" else math.nan for row in body])
        except (ValueError, IndexError):
            data[name] = np.full(len(body), math.nan)
    return header, data


def columns_dict(columns: Sequence[str], rows) -> Mapping[str, np.ndarray]:
    arr = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    return {c: arr[:, k] for k, c in enumerate(columns)}
