"""
Exception hierarchy shared by every shimcp module.

Numerical failures (singular Gram systems, iteration or kink budgets) derive from
ArithmeticError, bad inputs from ValueError, so callers that only know the
builtin exceptions still catch them.
"""

__author__ = "shimcp developers"
__version__ = 0.1


class ShimError(Exception):
    """Base class for all shimcp errors."""


class InvalidPatternError(ShimError, ValueError):
    pass


class DimensionError(ShimError, ValueError):
    pass


class ConfigError(ShimError, ValueError):
    pass


class DataError(ShimError, ValueError):
    pass


class SchemaError(DataError):
    """A CSV value that the schema cannot turn into a binary feature."""

    def __init__(self, message, row=None, column=None):
        if row is not None or column is not None:
            message = f'{message} (row {row}, column {column!r})'
        super().__init__(message)
        self.row = row
        self.column = column


class SizeError(ShimError, ValueError):
    pass


class NumericError(ShimError, ArithmeticError):
    pass


class SingularityError(NumericError):
    """The active Gram matrix cannot be inverted; `patterns` names the colliding terms."""

    def __init__(self, patterns, message=None):
        self.patterns = tuple(patterns)
        if message is None:
            names = ', '.join(str(p) for p in self.patterns)
            message = (f'active Gram matrix is singular for patterns [{names}]; '
                       f'set l2_weight > 0 to fit the elastic-net variant instead')
        super().__init__(message)


class IterationLimitError(NumericError):
    """Column generation ran out of rounds; `state` is the last restricted fit."""

    def __init__(self, state, message='column generation did not converge'):
        super().__init__(message)
        self.state = state


class BudgetExceededError(NumericError):
    """A tau-path hit its kink or wall-clock budget; `partial` holds what was traced."""

    def __init__(self, partial, reason, message=None):
        if message is None:
            message = f'tau-path aborted after {len(partial.kinks)} kinks ({reason} budget exceeded)'
        super().__init__(message)
        self.partial = partial
        self.reason = reason


class ConvergenceError(NumericError):
    pass
