"""Batch figure generation from simulation CSV artifacts."""

from .errors import PlotError, SchemaError, SpecError
from .render import KINDS, PlotSpec, RenderResult, render

__all__ = [
    "KINDS",
    "PlotError",
    "PlotSpec",
    "RenderResult",
    "SchemaError",
    "SpecError",
    "render",
]
