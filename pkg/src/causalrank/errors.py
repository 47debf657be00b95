"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to:
0 success, 1 internal, 2 config/input, 3 data degeneracy, 4 evaluation mismatch.
"""


class CausalRankError(Exception):
    exit_code = 1


class ShapeError(CausalRankError, ValueError):
    pass


class InputError(CausalRankError):
    exit_code = 2


class ConfigError(InputError):
    pass


class SchemaError(InputError):
    pass


class ParseError(InputError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(InputError, ValueError):
    pass


class DegenerateError(CausalRankError, ValueError):
    """Data cannot support the requested computation."""

    exit_code = 3


class DegenerateColumnError(DegenerateError):
    def __init__(self, column, reason="zero variance"):
        super().__init__(f"column {column!r} is degenerate: {reason}")
        self.column = column


class UnimputableError(DegenerateError):
    def __init__(self, column):
        super().__init__(f"column {column!r} has no observed values to impute from")
        self.column = column


class DegenerateLabelsError(DegenerateError):
    pass


class EmptyCohortError(DegenerateError):
    pass


class BalanceError(DegenerateError):
    pass


class InsufficientOverlapError(DegenerateError):
    pass


class ConvergenceError(CausalRankError):
    exit_code = 3

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class EvaluationMismatchError(CausalRankError):
    exit_code = 4
