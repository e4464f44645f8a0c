"""Exception hierarchy shared across the package."""


class SkelmeshError(Exception):
    """Base class for all package errors."""


class ParseError(SkelmeshError):
    """Malformed input file. Carries the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyInputError(SkelmeshError):
    """An operation received an empty point set or file."""


class SizeError(SkelmeshError):
    """Requested more items than available, or too few inputs."""


class ParameterError(SkelmeshError):
    """A parameter is outside its documented domain."""


class ShapeMismatchError(SkelmeshError):
    """Array operands have incompatible shapes."""


class NumericError(SkelmeshError):
    """A computation produced a non-finite value."""


class DegenerateInputError(SkelmeshError):
    """Input is degenerate for the requested operation (zero extent,
    no trainable entries, single-graph dataset, ...)."""


class DuplicateNodeError(SkelmeshError):
    """Duplicate node id in a skeleton file."""


class DanglingParentError(SkelmeshError):
    """A node references a parent id that does not exist."""


class BudgetExceededError(SkelmeshError):
    """A bounded search ran out of its visit budget.

    ``best`` holds the best (non-exact) result found before exhaustion.
    """

    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best
