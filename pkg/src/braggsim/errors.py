"""Exception types shared across the package."""


class BraggSimError(Exception):
    """Base class for all package errors."""


class ParameterError(BraggSimError):
    """A physical or numerical parameter is out of its valid range."""


class ConfigurationError(BraggSimError):
    """A configuration file or override is invalid."""


class PropagationError(BraggSimError):
    """A propagation failed; carries context about where."""

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = dict(context or {})


class StiffnessError(PropagationError):
    """Adaptive step size underflowed; the problem looks stiff on this grid."""


class IntegrationError(PropagationError):
    """The ODE integrator failed to meet its tolerance."""
