"""Gaussian multiplicative chaos on the diamond hierarchical lattice.

Exact rational and float recursions for path intersections, the
path-averaging operator, GMC replica moments and the chaos expansion, with
seeded Monte Carlo checks against each of them.
"""

from .errors import (AddressError, CapExceededError, DiamondError, DivergenceError, EmptySupportError,
                     RangeError, RegimeError)
from .lattice import EdgeAddress, LatticeParams, VertexAddress
from .paths import CellSet, CoarsePath
from .rng import MeanEstimate, make_rng

__version__ = "0.1.0"

__all__ = [
    "AddressError", "CapExceededError", "CellSet", "CoarsePath", "DiamondError", "DivergenceError",
    "EdgeAddress", "EmptySupportError", "LatticeParams", "MeanEstimate", "RangeError", "RegimeError",
    "VertexAddress", "make_rng", "__version__",
]
