"""Exception hierarchy shared by every module."""


class Cat0Error(Exception):
    """Base class for all errors raised by cat0kit."""


class InputError(Cat0Error, ValueError):
    """Malformed or out-of-contract input."""


class SpaceMismatchError(InputError, TypeError):
    """A point, cloud or isometry does not belong to the space it was used with."""


class ParameterRangeError(InputError):
    """A scalar parameter lies outside its admissible range."""


class UnsupportedSpaceError(InputError):
    """The operation is only defined for a subset of the shipped spaces."""


class EmptyCloudError(InputError):
    """An operation that needs at least one point received an empty cloud."""


class ChainError(InputError):
    """A sequence of clouds is not nested as required."""
