"""Exception hierarchy.

Every error raised on purpose by the library derives from NakError, so the
CLI can map it to exit code 2 without swallowing genuine bugs.
"""


class NakError(Exception):
    pass


class InvalidInput(NakError, ValueError):
    pass


class InsufficientPrecision(NakError):
    pass


class DivisionByZero(NakError, ZeroDivisionError):
    pass


class NoSquareRoot(NakError, ValueError):
    pass


class OutOfDomain(NakError, ValueError):
    pass


class UnsupportedMeasure(NakError):
    pass


class TooLarge(NakError):
    pass


class InvalidConfiguration(NakError, ValueError):
    pass


class InvalidSchedule(NakError, ValueError):
    pass


class ConstructionFailure(NakError):
    pass


class AmbiguityFailure(NakError):
    pass


class InvalidFamily(NakError, ValueError):
    pass
