"""Chirp feature weighting, 2-D embedding, classification, and
per-record feature attribution, with deterministic SVG reporting.
"""

from .errors import ChirpmapError, DataError, NumericError, UsageError

__version__ = "0.1.0"

__all__ = [
    "ChirpmapError",
    "DataError",
    "NumericError",
    "UsageError",
    "__version__",
]
