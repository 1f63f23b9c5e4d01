"""Exception hierarchy shared by every module."""


class StableSumError(Exception):
    """Base class for library errors."""


class ParameterError(StableSumError, ValueError):
    """A parameter is malformed or out of its admissible range."""


class DomainError(StableSumError, ValueError):
    """The requested quantity is not defined (divergent moment, non-integrable integrand)."""


class RegimeRefusal(DomainError):
    """No integral formula backs a number for this (r, q, p) combination."""
