"""Exception hierarchy shared by all modules."""


class TripointError(Exception):
    """Base class for every error raised by the package."""


class StepSizeUnderflow(TripointError):
    pass


class OverflowGuard(TripointError):
    """Direct integration would produce entries beyond the double range."""


class ZeroOnContour(TripointError):
    pass


class NonIntegerWinding(TripointError):
    pass


class NotSimpleInDisk(TripointError):
    pass


class NoConvergence(TripointError):
    pass


class LostTrack(TripointError):
    pass


class NotContractive(TripointError):
    pass


class QuadratureStall(TripointError):
    pass


class DegenerateFit(TripointError):
    """Residuals underflow; the decay is better than measurable."""


class InsufficientData(TripointError):
    pass


class PeriodicityViolation(TripointError):
    pass


class CollisionNotBracketed(TripointError):
    pass


class ConfigError(TripointError):
    """Malformed run configuration; the message names the line or field."""
