"""Figure generation for vpme experiment outputs.

Consumes only the documented on-disk formats (run-record NDJSON,
distance-series NDJSON, summary and sweep CSV, binary particle
snapshots) through its own readers; the simulation package is never
imported, so the two sides can evolve against the file contract
alone.
"""

from .figures import KINDS, FigureError, FigureSpec, Style, build_figure, render
from .schema import SCHEMA_VERSION, SchemaMismatch

__all__ = [
    "KINDS", "FigureError", "FigureSpec", "Style", "build_figure", "render",
    "SCHEMA_VERSION", "SchemaMismatch",
]

__version__ = "0.1.0"
