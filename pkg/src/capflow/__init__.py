"""Two-phase free-boundary flow in flat-interface coordinates."""
from .grid import GridSpec

__version__ = "0.1.0"
