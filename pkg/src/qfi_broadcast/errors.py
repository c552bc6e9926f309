"""Exception hierarchy for the toolkit."""


class QfiError(ValueError):
    """Base class for every error raised by this package."""


class InvalidState(QfiError):
    pass


class InvalidSubsystem(QfiError):
    pass


class NotHermitian(QfiError):
    pass


class NotPSD(QfiError):
    pass


class DimensionMismatch(QfiError):
    pass


class OutOfDomain(QfiError):
    pass


class NonSmoothPoint(QfiError):
    pass


class DivergentFisher(QfiError):
    """An outcome probability vanishes while its derivative does not."""


class ZeroInformation(QfiError):
    pass


class NonIdentifiable(QfiError):
    """The likelihood does not depend on the parameter."""


class InvalidPOVM(QfiError):
    pass


class TooManyOutcomes(QfiError):
    pass


class ArityMismatch(QfiError):
    pass


class NotProductOutput(QfiError):
    """Channel outputs are not factorized, so the no-cloning audit does not apply."""


class NotUniformError(QfiError):
    pass


class ConfigError(QfiError):
    pass


class DegeneratePoint(QfiError):
    """The state changes rank at this parameter value; the SLD is not unique there."""
