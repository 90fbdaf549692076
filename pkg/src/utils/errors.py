"""
Error categories for the MQC localization simulator.

Every error raised by the library derives from SimulationError and from the
builtin exception that matches its meaning, so callers may catch either.
main.py maps the category to a log tag and an exit code.
"""

from typing import Optional


class SimulationError(Exception):
    """Base class for all categorised simulator errors."""

    category = "simulation"
    exit_code = 4


class SizeError(SimulationError, ValueError):
    category = "size"


class SiteIndexError(SimulationError, IndexError):
    category = "index"


class GeometryError(SimulationError, ValueError):
    category = "geometry"


class DomainError(SimulationError, ValueError):
    category = "domain"


class OperatorKindError(SimulationError, TypeError):
    category = "kind"


class ShapeError(SimulationError, ValueError):
    category = "shape"


class AliasingError(SimulationError, ValueError):
    category = "aliasing"


class SpectrumDiagnosticError(SimulationError, ArithmeticError):
    category = "diagnostic"


class DegenerateInputError(SimulationError, ValueError):
    category = "degenerate"


class InsufficientDataError(SimulationError, ValueError):
    category = "insufficient-data"


class ConfigError(SimulationError, ValueError):
    category = "config"
    exit_code = 2


class OutputError(SimulationError, OSError):
    """Filesystem failure while reading or writing a result file."""

    category = "io"
    exit_code = 3

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        if path:
            message = f"{message} ({path})"
        super().__init__(message)
