"""Exception types shared by every module.

Each class carries the CLI exit code it maps to.
"""


class DfsoError(Exception):
    exit_code = 1


class DomainError(DfsoError, ValueError):
    """Input outside the operation's domain."""

    exit_code = 1


class UnsupportedError(DomainError):
    """Valid input that this implementation does not handle (e.g. q = 3 in a model)."""


class ConstructionError(DfsoError):
    """A model builder produced an index or coefficient it cannot represent."""

    exit_code = 1


class ParseError(DfsoError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InfeasibleError(DfsoError):
    exit_code = 2


class ResourceError(DfsoError):
    """Size guard, node limit or iteration budget exceeded."""

    exit_code = 3
