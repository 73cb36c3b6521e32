"""Exception hierarchy.

Every error raised on bad input derives from :class:`SeedDistillError`.  The
command line maps :class:`ParseError` to exit code 2, :class:`ValidationError`
to exit code 3, and anything else to 4.
"""


class SeedDistillError(Exception):
    exit_code = 4


class ParseError(SeedDistillError, ValueError):
    exit_code = 2


class ValidationError(SeedDistillError, ValueError):
    exit_code = 3


class DuplicateSeed(ValidationError):
    pass


class MissingGeneral(ValidationError):
    pass


class MultiTokenSeed(ValidationError):
    pass


class ReservedToken(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class GammaOutOfRange(ValidationError):
    pass


class EmptyCorpus(ValidationError):
    pass


class MissingGoldLabels(ValidationError):
    pass


class MissingPrecomputed(ValidationError):
    pass


class SpecInfeasible(ValidationError):
    pass
