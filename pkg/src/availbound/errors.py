"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`AvailBoundError`, so the CLI can turn any of them into a clean
nonzero exit with a readable message.
"""


class AvailBoundError(Exception):
    """Base class for all package errors."""


# model validation


class ModelError(AvailBoundError):
    """The model parameters violate an admissibility assumption."""


class ExponentTooSmall(ModelError):
    pass


class LambdaNotDominating(ModelError):
    pass


class HazardBoundViolated(ModelError):
    pass


class RepairTailViolated(ModelError):
    pass


class InvalidTable(ModelError):
    """A tabulated law is malformed (ordering, range, missing origin)."""


class InvalidState(ModelError):
    pass


# numerics


class NumericsError(AvailBoundError):
    pass


class NoConvergence(NumericsError):
    pass


class RatioOutOfRange(NumericsError):
    pass


class BracketFailure(NumericsError):
    pass


class InversionFailed(NumericsError):
    pass


# bound engine


class BoundError(AvailBoundError):
    pass


class RangeError(BoundError):
    pass


class DivergentMoment(BoundError):
    pass


class InvalidWindow(BoundError):
    pass


class AlphaOutOfRange(BoundError):
    pass


class SeriesDivergent(BoundError):
    pass


class NoFeasiblePoint(BoundError):
    pass


# simulation / cli


class CapExceeded(AvailBoundError):
    pass


class ConfigError(AvailBoundError):
    pass
