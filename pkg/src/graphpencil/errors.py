"""Exception hierarchy shared by the library and the CLI."""


class GraphPencilError(Exception):
    """Base class for all errors raised by graphpencil."""


class ValidationError(GraphPencilError, ValueError):
    """Input violates a documented invariant."""


class ParseError(GraphPencilError, ValueError):
    """A text file or glyph string could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BudgetError(GraphPencilError, ValueError):
    """Requested enumeration or table size exceeds what the graph/budget allows."""


class NumericalError(GraphPencilError, ArithmeticError):
    """The pencil could not produce a trustworthy solution.

    ``stage`` names the pipeline step that failed and ``details`` carries
    whatever measurements motivated the failure (singular values, gaps...).
    """

    def __init__(self, message, stage=None, details=None):
        if stage:
            message = f"[{stage}] {message}"
        super().__init__(message)
        self.stage = stage
        self.details = dict(details or {})


class DegeneracyError(NumericalError):
    """Blocks are not degree-separated, so the Vandermonde system is singular."""


class ConditioningError(NumericalError):
    """A pencil matrix is numerically rank deficient."""
