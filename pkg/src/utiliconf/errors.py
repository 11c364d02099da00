"""Exception types raised across the package."""


class InputDomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class FormatError(ValueError):
    """A runtime matrix, utility table or spec file is malformed."""


class InfeasibleInputsError(ValueError):
    """Procedure inputs cannot satisfy the procedure's preconditions."""


class ExhaustedStreamError(IndexError):
    """A finite instance stream has no instance with the requested index."""


class QuadratureError(ArithmeticError):
    """Numerical integration failed to reach the requested tolerance."""


class NoCounterexampleError(ValueError):
    """An adversarial construction was requested where none can exist."""
