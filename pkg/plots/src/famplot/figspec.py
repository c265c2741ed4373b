"""Figure specifications: a YAML file describes one or more multi-panel
figures as pure views of scenario CSV columns."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class Series:
    csv: str
    column: str
    label: str | None = None
    x: str = "t"


@dataclass(frozen=True)
class Reference:
    setpoint: float | None = None
    band: float | None = None       # absolute half-width around the setpoint
    start: float | None = None      # optional x position the reference begins at


@dataclass(frozen=True)
class Panel:
    series: tuple[Series, ...]
    title: str = ""
    ylabel: str = ""
    xlabel: str = "t [s]"
    reference: Reference | None = None


@dataclass(frozen=True)
class FigureSpec:
    output: str
    panels: tuple[Panel, ...]
    layout: tuple[int, int]
    title: str = ""
    size: tuple[float, float] = (9.0, 7.5)

    def __post_init__(self):
        rows, cols = self.layout
        if rows * cols < len(self.panels):
            raise SpecError(f"{self.output}: layout {rows}x{cols} cannot hold "
                            f"{len(self.panels)} panels")


def _check_keys(mapping, allowed, where):
    for key in mapping:
        if key not in allowed:
            raise SpecError(f"{where}: unknown key {key!r}")


def _parse_panel(entry, where):
    _check_keys(entry, {"title", "ylabel", "xlabel", "series", "reference"}, where)
    series_list = entry.get("series")
    if not series_list:
        raise SpecError(f"{where}: needs at least one series")
    series = []
    for i, s in enumerate(series_list):
        _check_keys(s, {"csv", "column", "label", "x"}, f"{where}.series[{i}]")
        if "csv" not in s or "column" not in s:
            raise SpecError(f"{where}.series[{i}]: needs 'csv' and 'column'")
        series.append(Series(csv=str(s["csv"]), column=str(s["column"]),
                             label=s.get("label"), x=str(s.get("x", "t"))))
    ref = None
    if "reference" in entry:
        r = entry["reference"]
        _check_keys(r, {"setpoint", "band", "start"}, f"{where}.reference")
        ref = Reference(setpoint=None if r.get("setpoint") is None else float(r["setpoint"]),
                        band=None if r.get("band") is None else float(r["band"]),
                        start=None if r.get("start") is None else float(r["start"]))
    return Panel(series=tuple(series), title=str(entry.get("title", "")),
                 ylabel=str(entry.get("ylabel", "")),
                 xlabel=str(entry.get("xlabel", "t [s]")), reference=ref)


def load_specs(path) -> list[FigureSpec]:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as err:
        raise SpecError(f"{path}: {err}") from err
    if not isinstance(data, dict) or "figures" not in data:
        raise SpecError(f"{path}: top level must be a mapping with a 'figures' list")
    _check_keys(data, {"figures"}, str(path))
    out = []
    for i, fig in enumerate(data["figures"]):
        where = f"{path}:figures[{i}]"
        _check_keys(fig, {"output", "title", "layout", "size", "panels"}, where)
        if "output" not in fig or "panels" not in fig:
            raise SpecError(f"{where}: needs 'output' and 'panels'")
        layout = fig.get("layout", {})
        rows = int(layout.get("rows", len(fig["panels"])))
        cols = int(layout.get("cols", 1))
        size = fig.get("size", [9.0, 7.5])
        panels = tuple(_parse_panel(p, f"{where}.panels[{j}]")
                       for j, p in enumerate(fig["panels"]))
        out.append(FigureSpec(output=str(fig["output"]), panels=panels,
                              layout=(rows, cols), title=str(fig.get("title", "")),
                              size=(float(size[0]), float(size[1]))))
    return out
