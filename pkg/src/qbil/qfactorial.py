"""q-shifted factorials (a;q)_k for integer k and k = infinity.

Negative indices follow (a;q)_{-n} = 1/(aq^{-n};q)_n.  A vanishing factor in that
reciprocal product yields the :data:`POLE` marker rather than a float infinity,
and ``reciprocal(POLE)`` is an exact zero.  This is what lets bilateral sums
terminate from below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable

import mpmath

from qbil.errors import ExactInfiniteProduct, IndeterminateProduct, PoleEncountered
from qbil.numerics import DOUBLE, EXACT, Mode, Tower

INF = math.inf


class _Pole:
    """Marker for an infinite q-Pochhammer value at a negative index."""

    _instance: "_Pole | None" = None

    def __new__(cls) -> "_Pole":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Pole"

    def __reduce__(self) -> str:
        return "POLE"


POLE = _Pole()


def is_pole(v: Any) -> bool:
    return v is POLE


def tower_of(x: Any) -> Tower:
    """Infer the tower of a raw value (used when callers omit it)."""
    if isinstance(x, (Fraction, int)) and not isinstance(x, bool):
        return EXACT
    if isinstance(x, (mpmath.mpc, mpmath.mpf)):
        return Tower(Mode.BIG, max(mpmath.mp.dps - 10, 15))
    return DOUBLE


def vanishes(factor: Any, scale: Any, tower: Tower) -> bool:
    """Whether ``factor = 1 - w`` is zero, given ``scale = |w|``."""
    if tower.is_exact:
        return factor == 0
    return abs(factor) <= tower.zero_tol * max(1.0, float(scale))


def is_zero(v: Any) -> bool:
    return v is not POLE and v == 0


def reciprocal(v: Any, tower: Tower | None = None) -> Any:
    """1/v with 1/POLE = 0 and 1/0 = POLE."""
    if v is POLE:
        return tower.zero() if tower is not None else 0
    if v == 0:
        return POLE
    return 1 / v


def ext_mul(u: Any, v: Any) -> Any:
    """Product of extended values; POLE times zero is an error."""
    if u is POLE or v is POLE:
        other = v if u is POLE else u
        if other is not POLE and other == 0:
            raise IndeterminateProduct("pole multiplied by zero")
        return POLE
    return u * v


def ext_div(u: Any, v: Any, tower: Tower | None = None) -> Any:
    return ext_mul(u, reciprocal(v, tower))


# -- q-Pochhammer ------------------------------------------------------

@dataclass(frozen=True)
class InfiniteProduct:
    """Truncated (a;q)_inf with the number of factors used and a remainder bound.

    ``rel_bound`` bounds |(a;q)_inf / partial - 1|.
    """

    value: Any
    factors: int
    rel_bound: float


def qpoch(a: Any, q: Any, k: int | float, tower: Tower | None = None, term_tol: float | None = None) -> Any:
    """(a;q)_k for integer k or k = INF; returns a raw value or POLE."""
    tower = tower or tower_of(a)
    if k == INF:
        return qpoch_infinite(a, q, tower, term_tol).value
    k = int(k)
    if k >= 0:
        return _finite_product(a, q, k, tower)
    return _negative_index(a, q, -k, tower)


def _finite_product(a: Any, q: Any, k: int, tower: Tower) -> Any:
    result = tower.one() if not tower.is_exact else Fraction(1)
    w = a
    for _ in range(k):
        f = 1 - w
        if vanishes(f, abs(w), tower):
            return tower.zero()
        result *= f
        w *= q
    return result


def _negative_index(a: Any, q: Any, n: int, tower: Tower) -> Any:
    denom = tower.one()
    w = a
    for _ in range(n):
        w = w / q
        f = 1 - w
        if vanishes(f, abs(w), tower):
            return POLE
        denom *= f
    return 1 / denom


def qpoch_infinite(a: Any, q: Any, tower: Tower, term_tol: float | None = None) -> InfiniteProduct:
    """(a;q)_inf truncated once |a||q|^J < term_tol/2.

    The remainder prod_{j>=J}(1 - a q^j) differs from 1 by at most exp(S) - 1 with
    S = sum_{j>=J} |a||q|^j/(1-|a||q|^j), bounded by a geometric series.
    """
    if tower.is_exact:
        raise ExactInfiniteProduct("infinite products are not available in exact mode")
    if term_tol is None:
        term_tol = tower.default_tolerance().term_tol
    aq = abs(q)
    if not 0 < aq < 1:
        raise ValueError("base must satisfy 0 < |q| < 1")
    limit = term_tol / 2
    fa, fq = float(abs(a)), float(aq)
    # number of factors J: first j with |a||q|^j < limit (moduli are geometric)
    J = 0 if fa < limit else int(math.floor(math.log(limit / fa) / math.log(fq))) + 1
    while J > 0 and fa * fq ** (J - 1) < limit:
        J -= 1
    while fa * fq**J >= limit:
        J += 1
    w = a
    result = tower.one()
    for _ in range(J):
        result *= 1 - w
        w *= q
    tail = fa * fq**J
    s = tail / (1 - fq) / max(1 - tail, 1e-300)
    return InfiniteProduct(result, J, math.expm1(s))


def qpoch_multi(params: Iterable[Any], q: Any, k: int | float, tower: Tower | None = None,
                term_tol: float | None = None) -> Any:
    """Product of (a_i;q)_k with POLE propagation."""
    params = list(params)
    if tower is None:
        tower = tower_of(params[0]) if params else tower_of(q)
    result: Any = tower.one()
    saw_pole = saw_zero = False
    for a in params:
        v = qpoch(a, q, k, tower, term_tol)
        if v is POLE:
            saw_pole = True
        elif v == 0:
            saw_zero = True
        else:
            result *= v
    if saw_pole and saw_zero:
        raise IndeterminateProduct("pole and zero in the same product")
    if saw_pole:
        return POLE
    if saw_zero:
        return tower.zero()
    return result


def qpoch_split(a: Any, q: Any, n: int, m: int, tower: Tower | None = None) -> tuple[Any, Any]:
    """Both sides of (a;q)_{n+m} = (a;q)_n (aq^n;q)_m."""
    tower = tower or tower_of(a)
    lhs = qpoch(a, q, n + m, tower)
    rhs = ext_mul(qpoch(a, q, n, tower), qpoch(a * q**n, q, m, tower))
    return lhs, rhs


def qpoch_negate(a: Any, q: Any, n: int, tower: Tower | None = None) -> Any:
    """(a;q)_{-n} computed as 1/(aq^{-n};q)_n; an independent oracle for ``qpoch``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    tower = tower or tower_of(a)
    base = a * q ** (-n)
    denom = tower.one()
    w = base
    for _ in range(n):
        f = 1 - w
        if vanishes(f, abs(w), tower):
            raise PoleEncountered(f"(a;q)_{{-{n}}} has a vanishing factor")
        denom *= f
        w *= q
    return 1 / denom


def paired_infinite_sq(x2: Any, q: Any, tower: Tower | None = None, term_tol: float | None = None) -> Any:
    """(x;q)_inf (-x;q)_inf expressed through x^2 only: (x^2;q^2)_inf."""
    tower = tower or tower_of(x2)
    return qpoch_infinite(x2, q * q, tower, term_tol).value


def paired_infinite(x: Any, q: Any, tower: Tower | None = None, term_tol: float | None = None) -> Any:
    """(x;q)_inf (-x;q)_inf = (x^2;q^2)_inf."""
    return paired_infinite_sq(x * x, q, tower, term_tol)


# -- pole proximity ----------------------------------------------------

def closest_factor(x: Any, q: Any, start: int, stop: int | None) -> float:
    """min |1 - x q^j| over start <= j < stop (stop None means unbounded).

    Only factors with |x q^j| in [1/2, 2] can come close to zero, so the scan is
    restricted to that window.  ``q`` may have modulus above 1 (used for the
    negative-index direction with q replaced by 1/q).
    """
    ax = abs(complex(x))
    aq = abs(complex(q))
    if ax == 0 or aq == 1:
        return 1.0
    lg = math.log(aq)
    t1 = math.log(0.5 / ax) / lg
    t2 = math.log(2.0 / ax) / lg
    j0 = max(start, math.floor(min(t1, t2)))
    j1 = math.ceil(max(t1, t2)) + 1
    if stop is not None:
        j1 = min(stop, j1)
    best = 1.0
    xc, qc = complex(x), complex(q)
    for j in range(j0, j1):
        best = min(best, abs(1 - xc * qc**j))
    return best
