"""Newton solver with randomized deflation for singular polynomial roots."""

from .polysys import (
    ParseError,
    Polynomial,
    PolyMatrix,
    PolySystem,
    parse_system,
    format_system,
)

__version__ = "0.1.0"

__all__ = [
    "ParseError",
    "Polynomial",
    "PolyMatrix",
    "PolySystem",
    "parse_system",
    "format_system",
    "__version__",
]
