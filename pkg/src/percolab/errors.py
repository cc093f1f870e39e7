"""Exception hierarchy shared by every percolab module."""


class PercolabError(Exception):
    """Base class; the CLI maps every subclass to exit code 2."""


class InvalidSpec(PercolabError, ValueError):
    pass


class InvalidVertex(PercolabError, ValueError):
    pass


class InvalidPermutation(InvalidVertex):
    pass


class InvalidDistance(PercolabError, ValueError):
    pass


class ExplicitScaleExceeded(PercolabError):
    pass


class BallTooLarge(PercolabError):
    pass


class UnsupportedFamily(PercolabError):
    pass


class DomainMismatch(PercolabError, ValueError):
    pass


class RoundBudgetExceeded(PercolabError):
    pass


class InvalidRound(PercolabError, ValueError):
    pass


class WitnessLayerInvalid(PercolabError, ValueError):
    pass


class TraceMismatch(PercolabError, ValueError):
    pass


class NoCrossing(PercolabError):
    pass


class DomainError(PercolabError, ValueError):
    pass
