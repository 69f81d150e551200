"""Static figure rendering for the constellation CLI's CSV artifacts."""

from .errors import EmptyInput, MissingColumn, PlotError
from .render import FigureKind, PlotSpec, build_figure, render

__all__ = [
    "EmptyInput",
    "FigureKind",
    "MissingColumn",
    "PlotError",
    "PlotSpec",
    "build_figure",
    "render",
]
