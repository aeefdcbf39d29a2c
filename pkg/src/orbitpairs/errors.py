"""Exception hierarchy shared by the package and the command line front end."""


class OrbitPairsError(Exception):
    """Base class for all errors raised by orbitpairs."""

    kind = "error"


class ModelError(OrbitPairsError):
    """Malformed or degenerate flow model."""

    kind = "model"


class DomainError(OrbitPairsError, ValueError):
    """Argument outside the domain of an operation."""

    kind = "domain"


class OutOfRangeError(DomainError):
    """Query beyond the length cutoff a table was built for."""

    kind = "range"


class ResourceError(OrbitPairsError):
    """A configured size budget would be exceeded."""

    kind = "resource"


class NumericError(OrbitPairsError, ArithmeticError):
    """An iterative solver failed to converge."""

    kind = "numeric"


class IngestionError(OrbitPairsError):
    """An orbit table or model file does not match its schema."""

    kind = "ingest"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
