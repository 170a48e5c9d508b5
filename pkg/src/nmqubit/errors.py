"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class SingularPropagatorError(ArithmeticError):
    """A propagator could not be inverted at the requested time."""


class StiffnessError(ArithmeticError):
    """The adaptive integrator's step size underflowed."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class ToleranceNotMetError(ArithmeticError):
    """Adaptive quadrature did not reach the requested accuracy."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class RateUndefinedError(ArithmeticError):
    """A rate defined through a logarithm hit a non-positive argument."""


class KernelPoleError(ArithmeticError):
    """A Laplace-domain eigenvalue vanished, so the memory kernel has a pole."""


class StabilityError(ArithmeticError):
    """An explicit scheme's time step violates its stability bound."""


class UnsupportedModelError(ValueError):
    """The model lies outside the class an operation supports."""
