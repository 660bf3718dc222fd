"""Figure rendering for the clkl benchmark CSVs.

Consumes only the documented CSV schemas (clkl-trials-v1, clkl-traces-v1)
and emits deterministic SVG files; it never imports the estimation package.
"""

from clkl_plots.figures import FIGURE_IDS, FigureSpec, SchemaError, render

__all__ = ["FIGURE_IDS", "FigureSpec", "SchemaError", "render"]
