"""Exception hierarchy shared by every module."""


class NeurodynError(Exception):
    """Base class for all library errors."""


class DomainError(NeurodynError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ConvergenceError(NeurodynError, ArithmeticError):
    """An iterative method failed to converge in its step budget."""


class NonFiniteStateError(NeurodynError, ArithmeticError):
    """An integrated state vector became NaN or infinite."""


class RegionError(DomainError):
    """An initialization lies outside the phase region a solver requires."""


class HorizonError(NeurodynError, RuntimeError):
    """A target was not reached before the time or step horizon."""
