"""Figure generation for dgflow CSV outputs.

The CSV files written by the dgflow command line tool are the only
interface; nothing here imports the solver.
"""

from .csvio import SchemaError, Table, read_table
from .plots import FigureSpec, plot_convergence, plot_growth, plot_mu_heatmap, \
    render

__version__ = "0.1.0"

__all__ = [
    "FigureSpec",
    "SchemaError",
    "Table",
    "plot_convergence",
    "plot_growth",
    "plot_mu_heatmap",
    "read_table",
    "render",
    "__version__",
]
