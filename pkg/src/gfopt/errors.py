"""Exception hierarchy shared by the optimisation modules."""


class GfoptError(Exception):
    """Base class for all errors raised by gfopt."""


class DomainError(GfoptError, ValueError):
    """An argument lies outside the domain of the function."""


class NonFiniteError(GfoptError, ArithmeticError):
    """A computation overflowed or produced NaN."""


class ConvergenceError(GfoptError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class DegenerateWeightsError(GfoptError, ArithmeticError):
    """Every particle carries zero weight."""


class AllInfiniteError(DegenerateWeightsError):
    """Every log-weight of a particle cloud is -inf."""


class DimensionError(GfoptError, ValueError):
    """Requested dimension is not supported."""


class UnknownNameError(GfoptError, KeyError):
    """Catalog lookup failed."""


class DivergedError(GfoptError, ArithmeticError):
    """The parameter sequence escaped to infinity."""


class RunAborted(GfoptError, RuntimeError):
    """Optimisation stopped early; carries the partial trace."""

    def __init__(self, message, trace=None, state=None):
        super().__init__(message)
        self.trace = list(trace or [])
        self.state = state


class ParseError(GfoptError, ValueError):
    """Malformed input file."""


class SingleClassError(GfoptError, ValueError):
    """A classification dataset holds a single label."""


class DegenerateColumnWarning(UserWarning):
    """A zero-variance feature column was dropped."""
