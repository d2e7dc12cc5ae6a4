"""Static figure rendering for gaussadvice experiment CSVs."""

__version__ = "0.1.0"

from .render import Curve, PlotSpec, Row, curve_stats, read_rows, render
