""" Exceptions raised by the mcloc package.

All exceptions derive from LocalizationError so callers can catch everything the package raises
in one place. Where a built-in exception describes the same problem, it is also a base class, so
``except ValueError`` keeps working for invalid inputs.
"""


class LocalizationError(Exception):
    """ Base class for errors raised by mcloc """


class InvalidParameterError(LocalizationError, ValueError):
    """ A parameter is outside the range an operation accepts """


class DomainError(InvalidParameterError):
    """ A special function was evaluated outside its mathematical domain """


class DegenerateInputError(InvalidParameterError):
    """ Inputs that make a statistic undefined, e.g. equal radii or a non-positive denominator """


class ThresholdError(LocalizationError, ArithmeticError):
    """ A decision threshold does not separate the two hypothesis means """


class QuorumTimeoutError(LocalizationError, TimeoutError):
    """ Collaborative sensors did not reach the quorum within the simulation horizon """


class ConfigError(LocalizationError, ValueError):
    """ A scenario configuration or CLI override is invalid """
