"""Exception types shared by the lattice, path, and chaos modules."""


class DiamondError(Exception):
    """Base class for errors raised by :mod:`diamond_gmc`."""


class AddressError(DiamondError, ValueError):
    """An edge or vertex address is malformed or too deep for the requested level."""


class RegimeError(DiamondError, ValueError):
    """The operation needs s > b (the GMC regime) but got s <= b."""


class CapExceededError(DiamondError, ValueError):
    """A size cap (degree, matrix entries, tuple count) would be exceeded."""


class DivergenceError(DiamondError, ArithmeticError):
    """An iteration that should converge diverged or failed its Cauchy test."""


class EmptySupportError(DiamondError, ValueError):
    """No directed path passes through every cell of the given set."""


class RangeError(DiamondError, OverflowError):
    """A value left the representable floating-point range."""
