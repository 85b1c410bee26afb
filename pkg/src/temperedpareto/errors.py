"""Exception hierarchy shared by all modules."""


class TemperedParetoError(Exception):
    """Base class for every error raised by the package."""


class DomainError(TemperedParetoError, ValueError):
    """An argument lies outside the domain of the operation."""


class InputError(TemperedParetoError, ValueError):
    """User-supplied data could not be read or contains no usable rows."""


class NumericError(TemperedParetoError, ArithmeticError):
    """A root finder, quadrature or linear solve failed."""


class DegenerateFitError(NumericError):
    """The data carry no information for the requested fit (e.g. all excesses equal)."""
