"""Deterministic SVG figures via matplotlib's SVG backend."""
from __future__ import annotations

import io
import os
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import OutputError, ValidationError  # noqa: E402
from .tables import read_csv  # noqa: E402

_STYLE = {
    "svg.hashsalt": "qthermo",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "figure.figsize": (6.4, 4.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def padded_range(values: np.ndarray, frac: float = 0.05) -> tuple[float, float] | None:
    """Finite data range grown by ``frac`` on both sides; constant data pads by frac*|v| (or frac)."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return None
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo
    if span == 0.0:
        span = abs(lo) if lo != 0.0 else 1.0
    return lo - frac * span, hi + frac * span


def _save(fig, path: Path) -> Path:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_text(buf.getvalue())
        os.replace(tmp, path)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from None
    return path


def line_plot(
    x: np.ndarray,
    series: Mapping[str, np.ndarray],
    path: str | Path,
    xlabel: str = "t",
    ylabel: str = "",
    title: str = "",
) -> Path:
    """Lines of each series against ``x``; non-finite points break the line."""
    if not series:
        raise ValidationError("nothing to plot: no columns selected")
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValidationError("nothing to plot: no data rows")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        allv = []
        for name, y in series.items():
            y = np.where(np.isfinite(y), y, np.nan)
            ax.plot(x, y, label=name, linewidth=1.4)
            allv.append(y)
        ylim = padded_range(np.concatenate(allv))
        if ylim is not None:
            ax.set_ylim(*ylim)
        if x.size > 1 and x.min() < x.max():
            ax.set_xlim(float(x.min()), float(x.max()))
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        return _save(fig, Path(path))


def heatmap(
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    path: str | Path,
    xlabel: str,
    ylabel: str,
    label: str,
    title: str = "",
) -> Path:
    """Colour map of z[j, i] over the grid (x[i], y[j]); NaN cells are left blank."""
    z = np.ma.masked_invalid(np.asarray(z, dtype=float))
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        mesh = ax.pcolormesh(x, y, z, shading="nearest", cmap="viridis", rasterized=False)
        fig.colorbar(mesh, ax=ax, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, Path(path))


def plot_csv(csv_path: str | Path, columns: Sequence[str], out: str | Path | None = None) -> Path:
    """Plot ``columns`` of a CSV against its first column; nothing is written on error."""
    header, data = read_csv(csv_path)
    unknown = [c for c in columns if c not in header]
    if unknown:
        raise ValidationError(f"unknown column(s) {', '.join(unknown)}; available: {', '.join(header)}")
    if not columns:
        raise ValidationError("no columns requested")
    xname = header[0]
    if data[xname].size == 0:
        raise ValidationError(f"{csv_path} has no data rows")
    out = Path(out) if out is not None else Path(csv_path).with_suffix(".svg")
    return line_plot(data[xname], {c: data[c] for c in columns}, out, xlabel=xname)
