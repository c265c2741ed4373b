"""famplot: multi-panel figure rendering for famsim scenario logs."""

__version__ = "0.1.0"

from .figspec import FigureSpec, load_specs  # noqa: F401
from .render import read_log, render, render_file  # noqa: F401
