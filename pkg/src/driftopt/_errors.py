"""Exception hierarchy shared by all modules."""


class DriftOptError(Exception):
    """Base class for library errors."""


class InvalidArgument(DriftOptError, ValueError):
    pass


class UnsupportedCost(DriftOptError, TypeError):
    pass


class NumericOverflow(DriftOptError, ArithmeticError):
    pass


class ConditioningError(DriftOptError, ArithmeticError):
    """Raised when a least-squares system is numerically rank deficient."""

    def __init__(self, message, condition_number=float("nan")):
        super().__init__(message)
        self.condition_number = condition_number


class WrongMethod(DriftOptError, ValueError):
    pass


class OptimizationError(DriftOptError, RuntimeError):
    """Non-finite quantities met during an optimization run."""

    def __init__(self, message, iteration=None, path_index=None):
        super().__init__(message)
        self.iteration = iteration
        self.path_index = path_index
