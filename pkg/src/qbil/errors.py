"""Exception hierarchy shared by all modules.

Every error carries a stable ``kind`` string (the class name) so reports and
the CLI can surface it without depending on Python class identity.
"""

from __future__ import annotations


class QbilError(Exception):
    """Base class for every error raised by the package."""

    @property
    def kind(self) -> str:
        return type(self).__name__


class IllegalDemotion(QbilError):
    pass


class ExactInfiniteProduct(QbilError):
    pass


class IndeterminateProduct(QbilError):
    pass


class PoleEncountered(QbilError):
    pass


class NonConvergent(QbilError):
    pass


class DivergentDomain(QbilError):
    pass


class PoleInTerm(QbilError):
    pass


class SigmaDegenerate(QbilError):
    pass


class NoContraction(QbilError):
    pass


class CertificationTooTight(QbilError):
    pass


class DegeneratePoint(QbilError):
    pass


class SymbolMissing(QbilError):
    pass


class UnknownMap(QbilError):
    pass


class SamplingExhausted(QbilError):
    pass


class SpecError(QbilError):
    """Malformed series specification or point file."""
