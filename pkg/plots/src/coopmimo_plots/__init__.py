"""Batch figure rendering for coopmimo experiment CSV files."""

from .render import FigureSpec, SchemaError, load_curves, render

__version__ = "0.1.0"
