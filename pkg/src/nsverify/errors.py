"""Exception types shared across the toolkit."""


class NsverifyError(Exception):
    """Base class for all toolkit errors."""


class DegenerateGridError(NsverifyError):
    """Grid too small for the requested stencil."""


class FieldMismatchError(NsverifyError):
    """Fields on inconsistent grids, layouts or shapes."""


class SolvabilityError(NsverifyError):
    """Poisson problem has no solution for the given data (non-zero mean
    source or net boundary flux); the message carries the measured value."""


class ConstraintError(NsverifyError):
    """A closed-form datum violates its structural constraint
    (ansatz solenoidality, tangential boundary datum)."""


class CFLError(NsverifyError):
    """Time step too large for the grid/data at run construction."""


class BlowUpError(NsverifyError):
    """Solver aborted on NaN or runaway energy growth."""

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


class FormatError(NsverifyError):
    """Malformed NSF1 payload."""


class ConfigError(NsverifyError):
    """Bad run configuration; carries the line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
