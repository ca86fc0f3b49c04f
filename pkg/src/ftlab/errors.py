"""Exception hierarchy shared across ftlab."""


class FtlabError(Exception):
    """Base class for all ftlab errors."""


class ArgumentError(FtlabError, ValueError):
    """Bad argument: unknown label, wrong shape, out-of-range parameter."""


class SizeError(FtlabError, ValueError):
    """Requested dimension exceeds the configured cap."""


class ValidationError(FtlabError, ValueError):
    """An operator failed a physical invariant (Hermiticity, trace, unitarity...)."""

    def __init__(self, message, path=None):
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path


class NumericError(FtlabError, ArithmeticError):
    """A numerical routine failed to converge."""


class SupportViolation(FtlabError, ArithmeticError):
    """A logarithm of zero probability was needed at an index with nonzero weight."""

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"{message} at index {index}")
        self.index = index


class PreconditionError(FtlabError, ValueError):
    """A theorem was evaluated outside the regime where it is defined."""


class BudgetError(FtlabError, ValueError):
    """Enumeration size exceeds the configured term budget."""

    def __init__(self, required, budget):
        super().__init__(f"enumeration needs {required} terms, budget is {budget}")
        self.required = required
        self.budget = budget


class FormatError(FtlabError, ValueError):
    """Input file does not have the expected layout."""
