"""Offline figure generation for manifold-ctrl CSV outputs.

This package is a pure consumer of the runner's CSV files; figures are
regeneration artifacts and never feed back into any computation.
"""

__version__ = "0.1.0"

from .figures import FIGURE_KINDS, FigureSpec, Io, MissingColumn, build_figure, render

__all__ = [
    "FIGURE_KINDS",
    "FigureSpec",
    "Io",
    "MissingColumn",
    "build_figure",
    "render",
]
