"""Exception types shared across the package."""


class CoupledBohmError(Exception):
    """Base class for all package errors."""


class SingularityError(CoupledBohmError):
    """The guidance field (or quantum potential) was evaluated too close to its singular set."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class StepUnderflow(CoupledBohmError):
    """The adaptive step size shrank below the representable resolution of ``t``."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class GuardTriggered(CoupledBohmError):
    """A user guard rejected trial states until the step underflowed.

    Carries the last accepted time and state so callers can keep the partial result.
    """

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class QuadratureError(CoupledBohmError):
    """A quadrature rule could not be built, or a quadrature result was unstable."""


class ConfigError(CoupledBohmError):
    """A scenario document failed validation."""


class FirstOrderWarning(UserWarning):
    """Coupling is too strong for first-order (perturbative) closed forms to be trusted."""
