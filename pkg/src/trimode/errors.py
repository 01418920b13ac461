"""Exception types shared across the package."""


class TrimodeError(Exception):
    """Base class for numerical and structural failures."""


class NonTracelessError(TrimodeError, ValueError):
    """A traceless matrix was required but the trace is not negligible."""


class FrameSingularError(TrimodeError):
    """Eigenframe construction failed: degenerate spectrum or a vanishing
    principal minor makes the triangular gauge singular at this point."""


class IntegrationError(TrimodeError):
    """An ODE or quadrature routine could not reach the requested tolerance."""


class RenormalizationError(TrimodeError, ZeroDivisionError):
    """Renormalization of an identically-zero quantity was requested."""
