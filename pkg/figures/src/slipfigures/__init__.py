"""Render figures from slipgait CSV/JSON exports.

Pure visualization: every plot is built from the documented CSV/JSON
artifact formats; no dynamics are ever recomputed here.
"""

__version__ = "0.1.0"

from .render import (
    FigureError,
    FigureSpec,
    KINDS,
    render,
)

__all__ = ["FigureError", "FigureSpec", "KINDS", "render", "__version__"]
