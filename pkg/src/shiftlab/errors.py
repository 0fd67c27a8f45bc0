"""Exception types shared across shiftlab."""


class ShiftlabError(Exception):
    pass


class InvalidParameterError(ShiftlabError, ValueError):
    pass


class DegenerateTailError(ShiftlabError, ZeroDivisionError):
    """Raised when an effective-rank quantity is requested on a zero tail."""


class UnsupportedRatioError(ShiftlabError, ValueError):
    """A target eigenvalue is positive where the source eigenvalue is zero."""


class PropertyFailure(ShiftlabError, AssertionError):
    """A computed quantity left the bracket a theorem guarantees."""
