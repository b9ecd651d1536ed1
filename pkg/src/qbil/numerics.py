"""Three-level arithmetic tower: complex double, complex big-float, exact rational.

Internally every module works with *raw* values (``complex``, ``mpmath.mpc`` or
``fractions.Fraction``) together with the :class:`Tower` that produced them, so
that hot loops avoid wrapper overhead.  :class:`Scalar` pairs a raw value with its
tower for the public conversion and comparison helpers.
"""

from __future__ import annotations

import contextlib
import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Any

import mpmath

from qbil.errors import IllegalDemotion, SpecError

# Extra working digits used inside big-float evaluations.
GUARD_DIGITS = 10
DEFAULT_PREC = 50


class Mode(str, enum.Enum):
    DOUBLE = "double"
    BIG = "big"
    EXACT = "exact"


@dataclass(frozen=True)
class Tolerance:
    """Numerical policy for one evaluation.

    ``term_tol`` drives series truncation, ``residual_tol`` decides identity
    checks and ``zero_floor`` keeps residual denominators away from zero.
    """

    term_tol: float
    residual_tol: float
    zero_floor: float

    def __post_init__(self) -> None:
        if not (self.term_tol > 0 and self.residual_tol > 0 and self.zero_floor > 0):
            raise ValueError("tolerances must be strictly positive")
        if self.term_tol > self.residual_tol:
            raise ValueError("term_tol must not exceed residual_tol")

    def with_residual(self, residual_tol: float) -> "Tolerance":
        return Tolerance(min(self.term_tol, residual_tol), residual_tol, self.zero_floor)


@dataclass(frozen=True)
class Tower:
    """An arithmetic mode; ``prec`` (decimal digits) only matters for BIG."""

    mode: Mode
    prec: int = DEFAULT_PREC

    # -- construction -------------------------------------------------
    @classmethod
    def parse(cls, name: str, prec: int | None = None) -> "Tower":
        """Parse ``double``, ``exact``, ``big`` or ``big(60)``."""
        name = name.strip().lower()
        if name.startswith("big"):
            rest = name[3:].strip("() ")
            if rest:
                prec = int(rest)
            return cls(Mode.BIG, prec or DEFAULT_PREC)
        try:
            return cls(Mode(name), prec or DEFAULT_PREC)
        except ValueError:
            raise SpecError(f"unknown tower {name!r}") from None

    @property
    def label(self) -> str:
        return f"big({self.prec})" if self.mode is Mode.BIG else self.mode.value

    @property
    def is_exact(self) -> bool:
        return self.mode is Mode.EXACT

    @property
    def is_big(self) -> bool:
        return self.mode is Mode.BIG

    def context(self) -> contextlib.AbstractContextManager:
        """Context manager setting the working precision for big-float arithmetic."""
        if self.mode is Mode.BIG:
            return mpmath.workdps(self.prec + GUARD_DIGITS)
        return contextlib.nullcontext()

    # -- conversion ---------------------------------------------------
    def convert(self, x: Any) -> Any:
        """Convert ``x`` into this tower's raw representation.

        Raises IllegalDemotion when a float value is pushed into exact mode.
        """
        if isinstance(x, Scalar):
            return promote(x, self).value
        if isinstance(x, str):
            x = parse_number(x)
        elif isinstance(x, (list, tuple)) and len(x) == 2:
            x = _pair_to_number(x)
        if self.mode is Mode.EXACT:
            if isinstance(x, bool):
                return Fraction(int(x))
            if isinstance(x, Rational):
                return Fraction(x)
            raise IllegalDemotion(f"cannot convert {type(x).__name__} {x!r} to an exact rational")
        if self.mode is Mode.DOUBLE:
            if isinstance(x, Fraction):
                return complex(float(x))
            if isinstance(x, (mpmath.mpf, mpmath.mpc)):
                return complex(x)
            return complex(x)
        with self.context():
            if isinstance(x, Fraction):
                return mpmath.mpc(mpmath.mpf(x.numerator) / x.denominator)
            if isinstance(x, (mpmath.mpc, mpmath.mpf)):
                return mpmath.mpc(x)
            if isinstance(x, (int, float, complex)):
                return mpmath.mpc(x)
            return mpmath.mpc(x)

    def one(self) -> Any:
        return self.convert(1)

    def zero(self) -> Any:
        return self.convert(0)

    # -- numeric helpers ----------------------------------------------
    def abs(self, x: Any) -> Any:
        """Modulus as float, mpf or Fraction according to the tower."""
        if self.mode is Mode.EXACT:
            return abs(x)
        if self.mode is Mode.BIG:
            return mpmath.fabs(x)
        return abs(x)

    @property
    def zero_tol(self) -> float:
        """Relative size under which a factor ``1 - x`` counts as vanishing."""
        if self.mode is Mode.EXACT:
            return 0.0
        if self.mode is Mode.BIG:
            return 10.0 ** (-(self.prec - 10))
        return 1e-12

    def is_unit(self, x: Any) -> bool:
        """True when ``x`` equals 1 exactly (exact) or to ``zero_tol`` (float)."""
        if self.mode is Mode.EXACT:
            return x == 1
        return abs(x - 1) <= self.zero_tol

    def default_tolerance(self) -> Tolerance:
        if self.mode is Mode.DOUBLE:
            return Tolerance(term_tol=1e-17, residual_tol=1e-12, zero_floor=1e-300)
        if self.mode is Mode.BIG:
            return Tolerance(
                term_tol=10.0 ** (-(self.prec + 3)),
                residual_tol=10.0 ** (-(self.prec - 10)),
                zero_floor=1e-30,
            )
        # Exact evaluations only sum terminating series; term_tol is unused.
        return Tolerance(term_tol=1e-300, residual_tol=1e-300, zero_floor=1e-300)

    def rank(self) -> tuple[int, int]:
        order = {Mode.EXACT: 0, Mode.DOUBLE: 1, Mode.BIG: 2}[self.mode]
        return (order, self.prec if self.mode is Mode.BIG else 0)


DOUBLE = Tower(Mode.DOUBLE)
BIG = Tower(Mode.BIG, DEFAULT_PREC)
EXACT = Tower(Mode.EXACT)


@dataclass(frozen=True)
class Scalar:
    """A raw value tagged with its arithmetic tower."""

    value: Any
    tower: Tower

    @classmethod
    def of(cls, x: Any, tower: Tower) -> "Scalar":
        return cls(tower.convert(x), tower)

    def __complex__(self) -> complex:
        return complex(self.value)


def promote(x: Scalar, target: Tower) -> Scalar:
    """Move ``x`` into ``target``; float to exact is forbidden."""
    src = x.tower
    if target.mode is Mode.EXACT and src.mode is not Mode.EXACT:
        raise IllegalDemotion(f"cannot demote {src.label} value to exact")
    if src.mode is Mode.BIG and target.mode is Mode.BIG and target.prec < src.prec:
        raise IllegalDemotion(f"cannot lower precision from {src.prec} to {target.prec}")
    if src.mode is Mode.BIG and target.mode is Mode.DOUBLE:
        raise IllegalDemotion("cannot demote big-float value to double")
    return Scalar(target.convert(x.value), target)


def common_tower(x: Scalar, y: Scalar) -> Tower:
    """The tower both arguments promote to (mixed precisions go to the larger)."""
    tx, ty = x.tower, y.tower
    if tx.mode is Mode.BIG and ty.mode is Mode.BIG:
        return tx if tx.prec >= ty.prec else ty
    return tx if tx.rank() >= ty.rank() else ty


def approx_eq(x: Scalar, y: Scalar, tol: Tolerance) -> tuple[bool, Any]:
    """Relative comparison ``|x-y| / max(|x|,|y|,zero_floor)``.

    Exact operands are compared literally; the residual is then 0 or the exact
    relative gap.  Returns ``(within_tolerance, residual)``.
    """
    tower = common_tower(x, y)
    a = promote(x, tower).value
    b = promote(y, tower).value
    if tower.is_exact:
        if a == b:
            return True, Fraction(0)
        return False, abs(a - b) / max(abs(a), abs(b))
    with tower.context():
        res = relative_residual(a, b, tower, tol.zero_floor)
    return res < tol.residual_tol, res


def relative_residual(a: Any, b: Any, tower: Tower, zero_floor: float) -> float:
    """Float relative residual of two raw values of ``tower``."""
    if tower.is_exact:
        if a == b:
            return 0.0
        return float(abs(a - b) / max(abs(a), abs(b)))
    diff = tower.abs(a - b)
    scale = max(tower.abs(a), tower.abs(b), zero_floor)
    return float(diff / scale)


# -- textual numbers ---------------------------------------------------

def parse_number(text: str) -> Any:
    """Parse ``"p/q"``, an integer, a decimal or a Python complex literal."""
    s = text.strip()
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        pass
    try:
        return complex(s.replace(" ", ""))
    except ValueError:
        raise SpecError(f"cannot parse number {text!r}") from None


def _pair_to_number(pair: Any) -> Any:
    re_, im_ = pair
    if isinstance(re_, str) or isinstance(im_, str):
        re_ = parse_number(re_) if isinstance(re_, str) else re_
        im_ = parse_number(im_) if isinstance(im_, str) else im_
        if isinstance(re_, Fraction) and isinstance(im_, Fraction) and im_ == 0:
            return re_
        return mpmath.mpc(_as_mpf(re_), _as_mpf(im_))
    return complex(float(re_), float(im_))


def _as_mpf(x: Any) -> Any:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x.real if isinstance(x, complex) else x)


def encode_number(x: Any) -> Any:
    """JSON form: ``"p/q"`` for rationals, ``[re, im]`` floats otherwise."""
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, int) and not isinstance(x, bool):
        return f"{x}/1"
    z = complex(x)
    return [_clean_float(z.real), _clean_float(z.imag)]


def _clean_float(v: float) -> float | str:
    if math.isfinite(v):
        return v + 0.0  # normalizes -0.0
    return repr(v)


def format_value(x: Any, digits: int = 17) -> str:
    """Human-readable rendering for text output."""
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, mpmath.mpc):
        if x.imag == 0:
            return mpmath.nstr(x.real, digits)
        return mpmath.nstr(x, digits)
    if isinstance(x, complex):
        if x.imag == 0:
            return repr(x.real)
        return repr(x)
    return str(x)

