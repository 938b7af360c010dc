"""Charts for budgeted-learning error curves."""

from .render import PlotSpec, SchemaError, build_figure, read_curves, render
