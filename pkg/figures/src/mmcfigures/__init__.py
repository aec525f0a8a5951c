"""Batch figure renderer for the converter workbench's CSV output."""

__version__ = "0.1.0"

from .schema import SchemaError, TimeSeries, SweepTable
from .plots import PlotSpec, PLOT_KINDS, render

__all__ = ["__version__", "SchemaError", "TimeSeries", "SweepTable",
           "PlotSpec", "PLOT_KINDS", "render"]
