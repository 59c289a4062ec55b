"""Convergence plotting for benchmark summary CSVs."""

from .errors import EmptyInput, PlotvizError, SchemaError
from .plotting import plot_convergence, plot_convergence_panels, read_summary

__all__ = [
    "EmptyInput",
    "PlotvizError",
    "SchemaError",
    "plot_convergence",
    "plot_convergence_panels",
    "read_summary",
]
