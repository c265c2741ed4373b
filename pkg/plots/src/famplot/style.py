"""Shared matplotlib defaults: every figure renders with the same fixed
style so re-rendering identical inputs yields identical images."""

import matplotlib

matplotlib.use("Agg")

RC = {
    "figure.dpi": 110,
    "savefig.dpi": 110,
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.grid": True,
    "grid.alpha": 0.35,
    "grid.linewidth": 0.6,
    "lines.linewidth": 1.1,
    "legend.fontsize": 8,
    "legend.framealpha": 0.8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.constrained_layout.use": True,
    # deterministic SVG element ids
    "svg.hashsalt": "famplot",
}

SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
SETPOINT_STYLE = {"color": "0.25", "linestyle": "--", "linewidth": 0.9}
BAND_STYLE = {"color": "0.25", "linestyle": ":", "linewidth": 0.7}


def apply():
    matplotlib.rcParams.update(RC)
