"""Exception hierarchy shared across the package."""


class EpifuseError(Exception):
    """Base class for all package errors."""


class DataValidationError(EpifuseError):
    """Raised when input data violates the documented ingest contract.

    Carries enough location detail (file, line, column) to point at the
    offending cell of a CSV.
    """

    def __init__(self, message, *, file=None, line=None, column=None):
        loc = []
        if file is not None:
            loc.append(str(file))
        if line is not None:
            loc.append(f"line {line}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.file = file
        self.line = line
        self.column = column


class ConfigError(EpifuseError):
    """Raised when a run configuration fails schema validation."""


class CalibrationError(EpifuseError):
    """Raised when rejection sampling accepts no draws.

    ``min_distance`` reports the smallest observed distance so the caller can
    pick a workable acceptance threshold.
    """

    def __init__(self, message, min_distance=None):
        super().__init__(message)
        self.min_distance = min_distance
