"""Exception hierarchy shared across the package."""


class InterarbError(Exception):
    """Base class for all package errors."""


class ParameterError(InterarbError, ValueError):
    pass


class ShapeError(InterarbError, ValueError):
    pass


class DataError(InterarbError, ValueError):
    """Raised for malformed or inconsistent input data."""


class ParseError(DataError):
    pass


class OrderingError(DataError):
    pass


class SchemaError(DataError):
    pass


class UnitError(DataError):
    pass


class InfeasibleBuildError(InterarbError, ValueError):
    """The problem is infeasible by construction (e.g. b0 outside the blocked range)."""


class SolverInconsistencyError(InterarbError, RuntimeError):
    """A reported optimum failed the independent feasibility re-check."""


class NumericError(InterarbError, ArithmeticError):
    pass


class SizeError(InterarbError, ValueError):
    pass


class DispatchInfeasibleError(InterarbError, RuntimeError):
    def __init__(self, hours):
        self.hours = list(hours)
        super().__init__(f"dispatch infeasible at hours {self.hours}")


class ConfigError(InterarbError, ValueError):
    pass
