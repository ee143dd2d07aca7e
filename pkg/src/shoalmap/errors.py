"""Exception hierarchy. The CLI maps these onto its exit codes."""


class ShoalmapError(Exception):
    pass


class UsageError(ShoalmapError, ValueError):
    """Bad arguments or configuration (exit code 1)."""


class DataError(ShoalmapError, ValueError):
    """Malformed or inconsistent input files (exit code 2)."""


class NumericalError(ShoalmapError, ArithmeticError):
    """Numerical failure (exit code 3)."""


class CurveRangeError(NumericalError, ValueError):
    pass


class DomainError(NumericalError, ValueError):
    pass


class DegenerateSpectrumError(NumericalError, ValueError):
    pass


class NormalizationError(DataError):
    pass


class FitError(NumericalError):
    pass
