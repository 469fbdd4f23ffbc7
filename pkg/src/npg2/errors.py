"""Exception types raised across the package."""


class NPError(Exception):
    """Base class for all package errors."""


class NonAdmissible(NPError, ValueError):
    """Coefficients violate f0 != 0 or the two strict positivity inequalities."""


class NotNormalized(NPError, ValueError):
    """Coefficients are not in arc-length gauge (g11 residual too large)."""


class OutOfDomain(NPError, ValueError):
    pass


class NoAdmissibleRoot(NPError, ValueError):
    pass


class Degenerate(NPError, ValueError):
    pass


class ZeroH0(NPError, ZeroDivisionError):
    pass


class ZeroA(NPError, ValueError):
    pass


class SingularRecurrence(NPError, ArithmeticError):
    pass


class InvalidConfig(NPError, ValueError):
    pass


class StartupFailure(NPError, RuntimeError):
    pass


class ConstraintViolatedAtStart(NPError, ValueError):
    pass


class InsufficientSamples(NPError, ValueError):
    pass


class NoDegeneration(NPError, ValueError):
    pass


class FitWindowTooSmall(NPError, ValueError):
    pass
