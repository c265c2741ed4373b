"""Turn figure specs plus scenario CSVs into image files.

Rendering never recomputes physics: every panel is a direct view of CSV
columns.  Output is deterministic for identical inputs (fixed style, no
timestamps in the image metadata).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import matplotlib.pyplot as plt

from . import style
from .figspec import FigureSpec, SpecError


class DataError(ValueError):
    pass


def read_log(path) -> dict[str, np.ndarray]:
    """Parse one scenario CSV into a column -> array mapping."""
    path = Path(path)
    try:
        with path.open() as stream:
            header = stream.readline().strip()
            if not header:
                raise DataError(f"{path}: empty file")
            names = header.split(",")
            data = np.loadtxt(stream, delimiter=",", ndmin=2)
    except OSError as err:
        raise DataError(f"{path}: cannot read: {err}") from err
    except ValueError as err:
        raise DataError(f"{path}: malformed CSV: {err}") from err
    if data.size == 0:
        raise DataError(f"{path}: no data rows")
    if data.shape[1] != len(names):
        raise DataError(f"{path}: {len(names)} columns in header, "
                        f"{data.shape[1]} in the data")
    return {name: data[:, j] for j, name in enumerate(names)}


def _column(log, name, csv, where):
    if name not in log:
        raise DataError(f"{where}: column {name!r} not present in {csv}")
    return log[name]


def render(spec: FigureSpec, data_dir, out_dir) -> Path:
    """Render one figure; returns the written image path."""
    style.apply()
    data_dir = Path(data_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    cache: dict[str, dict[str, np.ndarray]] = {}

    def log_for(csv_name):
        if csv_name not in cache:
            cache[csv_name] = read_log(data_dir / csv_name)
        return cache[csv_name]

    rows, cols = spec.layout
    fig, axes = plt.subplots(rows, cols, figsize=spec.size, squeeze=False)
    flat = axes.ravel()
    try:
        for idx, panel in enumerate(spec.panels):
            ax = flat[idx]
            for si, series in enumerate(panel.series):
                log = log_for(series.csv)
                x = _column(log, series.x, series.csv, spec.output)
                y = _column(log, series.column, series.csv, spec.output)
                ax.plot(x, y, color=style.SERIES_COLORS[si % len(style.SERIES_COLORS)],
                        label=series.label)
            if panel.reference is not None and panel.reference.setpoint is not None:
                ref = panel.reference
                x0 = ref.start if ref.start is not None else float(x[0])
                ax.hlines(ref.setpoint, x0, float(x[-1]), **style.SETPOINT_STYLE)
                if ref.band:
                    for sign in (1.0, -1.0):
                        ax.hlines(ref.setpoint + sign * ref.band, x0, float(x[-1]),
                                  **style.BAND_STYLE)
            ax.set_title(panel.title)
            ax.set_ylabel(panel.ylabel)
            ax.set_xlabel(panel.xlabel)
            if any(s.label for s in panel.series):
                ax.legend(loc="best")
        for idx in range(len(spec.panels), rows * cols):
            flat[idx].set_visible(False)
        if spec.title:
            fig.suptitle(spec.title)
        out_path = out_dir / spec.output
        suffix = out_path.suffix.lower()
        if suffix == ".svg":
            fig.savefig(out_path, metadata={"Date": None})
        else:
            fig.savefig(out_path)
    finally:
        plt.close(fig)
    return out_path


def render_file(spec_path, data_dir, out_dir) -> list[tuple[Path, int]]:
    """Render every figure in a spec file; returns (path, panel count) pairs."""
    from .figspec import load_specs
    out = []
    for spec in load_specs(spec_path):
        path = render(spec, data_dir, out_dir)
        out.append((path, len(spec.panels)))
    return out
