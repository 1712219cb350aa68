"""Figure rendering for the Allen-Cahn nudging experiment CSVs."""

from .render import build_figure, render
from .spec import PlotSpec, load_spec, resolve_inputs
from .tables import TableError, read_table

__version__ = "0.1.0"
