"""Exception hierarchy shared by all modules."""


class SenseNoiseError(Exception):
    """Base class for every error raised by this package."""


class NotHermitian(SenseNoiseError):
    pass


class NotPositiveDefinite(SenseNoiseError):
    pass


class DimensionMismatch(SenseNoiseError):
    pass


# DimMismatch is a short alias of DimensionMismatch
DimMismatch = DimensionMismatch


class WrongDomain(SenseNoiseError):
    pass


class NotDivisible(SenseNoiseError):
    pass


class BadDims(SenseNoiseError):
    pass


class BadTag(SenseNoiseError):
    pass


class ParseError(SenseNoiseError):
    pass


class EmptyInput(SenseNoiseError):
    pass


class BadScale(SenseNoiseError):
    pass


class LengthMismatch(SenseNoiseError):
    pass


class ZeroVariance(SenseNoiseError):
    pass


class SingularSystem(SenseNoiseError):
    """Unmixing system is (numerically) rank deficient.

    ``pixels`` holds the ``(x, y)`` coordinates, in the subsampled grid, of
    every offending pixel group when known.
    """

    def __init__(self, message, pixels=()):
        super().__init__(message)
        self.pixels = list(pixels)


class ConfigError(SenseNoiseError):
    pass
