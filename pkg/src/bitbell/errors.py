"""Exception types raised by the numerical routines."""


class BitbellError(Exception):
    """Base class for errors raised by this package."""


class CutoffExceeded(BitbellError):
    """The Fock truncation cannot hold the state within the tail budget."""


class DegenerateDenominator(BitbellError, ZeroDivisionError):
    """A ``1 - 4 c1 c2`` style denominator vanished."""


class BranchDomain(BitbellError, ValueError):
    """An inverse hyperbolic cosine was asked for an argument below 1."""
