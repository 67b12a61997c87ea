"""Exception types shared across the package."""


class PerifrontError(Exception):
    """Base class for all package errors."""


class NoPositivePeriodicState(PerifrontError):
    """The time-T map of the reaction ODE has no positive fixed point in the bracket."""


class NoConvergence(PerifrontError):
    """An iterative solver hit its iteration cap before meeting its tolerance."""


class NoCriticalLength(PerifrontError):
    """No sign change of the principal eigenvalue exists (|mean drift| >= cbar)."""


class TruncationFailure(PerifrontError):
    """Domain doubling cap reached without stabilization of the boundary flux."""


class NonpositiveLinearization(PerifrontError):
    """mean(a) <= 0, so cbar is undefined."""


class RegimeError(PerifrontError):
    """Operation invoked outside its admissible advection regime."""


class BracketFailure(PerifrontError):
    """A root/threshold bracket could not be established within the budget."""


class StepRejected(PerifrontError):
    """Front velocities failed to settle within the sweep cap; retry with smaller dt."""


class DomainCollapse(PerifrontError):
    """The free boundary domain shrank below the resolvable width."""


class ParseError(PerifrontError):
    """Malformed configuration text."""


class ValidationError(PerifrontError):
    """Well-formed configuration with an out-of-range or inconsistent value."""


class HorizonTooShortWarning(UserWarning):
    """Simulation reached its horizon without any classification hook firing."""
