"""Exception types shared across the package."""


class PdlearnError(Exception):
    """Base class for all package errors."""


class InputError(PdlearnError, ValueError):
    """An argument violates a documented precondition (rejected input)."""


class RankDeficiencyError(PdlearnError):
    """A structure matrix is rank deficient where a nonzero smallest
    eigenvalue is required; bound values would be meaningless."""


class NumericalError(PdlearnError):
    """An iterative routine failed to converge or produced non-finite
    values.  ``residual`` / ``step`` carry the failure context when known."""

    def __init__(self, message, residual=None, step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class IdxFormatError(PdlearnError):
    """An IDX file is malformed.  ``offset`` is the byte offset at which
    parsing failed."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ConfigError(PdlearnError):
    """A run configuration is invalid.  ``path`` is the dotted field path."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
