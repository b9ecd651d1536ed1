"""Evaluation and verification of unilateral and bilateral basic hypergeometric series."""

from qbil.errors import QbilError
from qbil.numerics import BIG, DOUBLE, EXACT, Mode, Scalar, Tolerance, Tower, approx_eq, promote

__all__ = [
    "BIG",
    "DOUBLE",
    "EXACT",
    "Mode",
    "QbilError",
    "Scalar",
    "Tolerance",
    "Tower",
    "approx_eq",
    "promote",
]

__version__ = "0.1.0"
