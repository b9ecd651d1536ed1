"""Term lists: products of q-Pochhammer symbols times an optional series.

A side of an identity is a list of :class:`Term` objects.  Each term is

    coeff * prod (x;q)_inf / prod (y;q)_inf
          * prod (x;q)_n  / prod (y;q)_n
          * prod (x2;q^2)_inf / prod (y2;q^2)_inf
          * series

where the q^2-products come from +-pairs (x;q)_inf(-x;q)_inf and only need x^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

from qbil.errors import DegeneratePoint, IndeterminateProduct, PoleInTerm
from qbil.qfactorial import (
    POLE,
    closest_factor,
    ext_mul,
    qpoch,
    qpoch_infinite,
    reciprocal,
    vanishes,
)
from qbil.series import (
    BILATERAL,
    AnySpec,
    EvalOptions,
    SeriesResult,
    SeriesSpec,
    VWPSpec,
    detect_termination,
    evaluate,
    sum_terms,
)

# Relative distance to a pole below which evaluation refuses the point.
DEGENERATE_RADIUS = 1e-6


@dataclass(frozen=True)
class ShiftedSum:
    """sum_{k>=start} w^k * vwp_sigma(k) * prod_i (x_i;q)_{o_i + s_i k}^{p_i}.

    Used for sums whose Pochhammer indices depend on an outer integer n, such as
    (c;q)_{n+k} or (a;q)_{n-k}.  ``factors`` holds tuples (x, o, s, p) with
    p = +1 or -1.  ``stop`` truncates the sum (inclusive).
    """

    q: Any
    w: Any
    factors: tuple
    sigma: Any = None
    start: int = 0
    stop: int | None = None

    kind = "shifted"

    def term(self, k: int, tower: Any) -> Any:
        """Term k computed from scratch (fine for small k; see :meth:`stepper`)."""
        q = self.q
        value: Any = self.w**k
        if self.sigma is not None:
            value = value * (1 - self.sigma * q ** (2 * k)) / (1 - self.sigma)
        for x, o, s, p in self.factors:
            v = qpoch(x, q, o + s * k, tower)
            value = ext_mul(value, v if p > 0 else reciprocal(v, tower))
        if value is POLE:
            raise PoleInTerm(f"pole in term {k}")
        return value

    def stepper(self, tower: Any) -> Callable[[int], Any]:
        """Sequential term generator for k = start, start+1, ...

        Individual factors such as (x;q)_{n-k} grow like q^{-k^2/2}, so the
        running product is updated by single-factor ratios.  Factors that are
        currently zero or infinite are tracked by status and kept out of the
        product.
        """
        return _Stepper(self, tower)


_NORMAL, _ZERO, _POLE = 0, 1, 2


class _Stepper:
    def __init__(self, ss: ShiftedSum, tower: Any):
        self.ss = ss
        self.tower = tower
        self.k = ss.start
        self.prod: Any = tower.convert(ss.w) ** ss.start if ss.start >= 0 else 1 / tower.convert(ss.w) ** (-ss.start)
        self.status = []
        for x, o, s, p in ss.factors:
            self.status.append(self._absorb(qpoch(x, ss.q, o + s * ss.start, tower), p))

    def _absorb(self, v: Any, p: int) -> int:
        if v is POLE:
            return _POLE
        if v == 0:
            return _ZERO
        self.prod = self.prod * v if p > 0 else self.prod / v
        return _NORMAL

    def _advance(self) -> None:
        ss, tower, q = self.ss, self.tower, self.ss.q
        k = self.k
        self.prod = self.prod * ss.w
        for i, (x, o, s, p) in enumerate(ss.factors):
            m = o + s * k  # current index; next is m + s
            st = self.status[i]
            if s > 0:
                if st == _NORMAL:
                    f = 1 - x * q**m
                    if vanishes(f, abs(x * q**m), tower):
                        self.status[i] = _ZERO
                    else:
                        self.prod = self.prod * f if p > 0 else self.prod / f
                elif st == _POLE:
                    self.status[i] = self._absorb(qpoch(x, q, m + 1, tower), p)
            else:
                if st == _NORMAL:
                    f = 1 - x * q ** (m - 1)
                    if vanishes(f, abs(x * q ** (m - 1)), tower):
                        self.status[i] = _POLE
                    else:
                        self.prod = self.prod / f if p > 0 else self.prod * f
                elif st == _ZERO:
                    self.status[i] = self._absorb(qpoch(x, q, m - 1, tower), p)
        self.k = k + 1

    def __call__(self, k: int) -> Any:
        while self.k < k:
            self._advance()
        if k != self.k:
            raise ValueError("stepper only moves forward")
        zero = pole = False
        for (_, _, _, p), st in zip(self.ss.factors, self.status):
            if st == _NORMAL:
                continue
            if (st == _ZERO) == (p > 0):
                zero = True
            else:
                pole = True
        if zero and pole:
            raise IndeterminateProduct(f"pole times zero in term {k}")
        if pole:
            raise PoleInTerm(f"pole in term {k}")
        if zero:
            return self.tower.zero()
        value = self.prod
        sigma = self.ss.sigma
        if sigma is not None:
            value = value * (1 - sigma * self.ss.q ** (2 * k)) / (1 - sigma)
        return value


@dataclass(frozen=True)
class Term:
    coeff: Any = 1
    num: tuple = ()
    den: tuple = ()
    fnum: tuple = ()
    fden: tuple = ()
    pnum: tuple = ()
    pden: tuple = ()
    series: Any = None


def term(
    num: Sequence[Any] = (),
    den: Sequence[Any] = (),
    series: Any = None,
    coeff: Any = 1,
    fnum: Sequence[tuple] = (),
    fden: Sequence[tuple] = (),
    pnum: Sequence[Any] = (),
    pden: Sequence[Any] = (),
) -> Term:
    return Term(coeff, tuple(num), tuple(den), tuple(fnum), tuple(fden), tuple(pnum), tuple(pden), series)


# -- evaluation --------------------------------------------------------

@dataclass
class SideValue:
    value: Any
    diagnostics: list


def evaluate_series(series: Any, opts: EvalOptions) -> SeriesResult:
    if isinstance(series, ShiftedSum):
        return sum_terms(series.stepper(opts.tower), opts, series.start, series.stop)
    return evaluate(series, opts)


def evaluate_term(t: Term, q: Any, opts: EvalOptions) -> tuple[Any, dict]:
    tower = opts.tower
    term_tol = opts.tolerance.term_tol
    value: Any = tower.convert(t.coeff) if isinstance(t.coeff, int) else t.coeff
    for x in t.num:
        value = value * qpoch_infinite(x, q, tower, term_tol).value
    for x in t.den:
        value = value / qpoch_infinite(x, q, tower, term_tol).value
    q2 = q * q
    for x in t.pnum:
        value = value * qpoch_infinite(x, q2, tower, term_tol).value
    for x in t.pden:
        value = value / qpoch_infinite(x, q2, tower, term_tol).value
    for x, n in t.fnum:
        value = ext_mul(value, qpoch(x, q, n, tower))
    for x, n in t.fden:
        value = ext_mul(value, reciprocal(qpoch(x, q, n, tower), tower))
    if value is POLE:
        raise DegeneratePoint("finite q-Pochhammer prefactor has a pole")
    diag: dict = {}
    if t.series is not None and value != 0:
        res = evaluate_series(t.series, opts)
        value = value * res.value
        diag = res.diagnostics()
    return value, diag


def evaluate_terms(terms: Sequence[Term], q: Any, opts: EvalOptions) -> SideValue:
    total = opts.tower.zero()
    diags = []
    with opts.tower.context():
        for t in terms:
            v, d = evaluate_term(t, q, opts)
            total = total + v
            diags.append(d)
    return SideValue(total, diags)


# -- degeneracy guard --------------------------------------------------

def _nearest(x: Any, q: Any, start: int, stop: int | None) -> float:
    return closest_factor(x, q, start, stop)


def term_pole_distance(t: Term, q: Any, tower: Any) -> tuple[float, str]:
    """Smallest relative distance of any denominator factor to zero, with a label."""
    best = (1.0, "")

    def upd(d: float, label: str) -> None:
        nonlocal best
        if d < best[0]:
            best = (d, label)

    for x in t.den:
        upd(_nearest(x, q, 0, None), "infinite-product denominator")
    for x in t.pden:
        upd(_nearest(x, q * q, 0, None), "paired-product denominator")
    for x, n in t.fden:
        if n >= 0:
            upd(_nearest(x, q, 0, n), "finite-product denominator")
    for x, n in t.fnum:
        if n < 0:
            upd(_nearest(x, 1 / q, 1, -n + 1), "negative-index numerator")
    s = t.series
    if isinstance(s, (SeriesSpec, VWPSpec)):
        upd(*series_pole_distance(s, tower))
    return best


def series_pole_distance(s: AnySpec, tower: Any) -> tuple[float, str]:
    best = (1.0, "")
    term = detect_termination(s, tower)
    stop = None if term.above is None else term.above
    for b in s.lower:
        if s.kind == BILATERAL and _is_positive_power(b, s.q, tower):
            continue
        d = _nearest(b, s.q, 0, stop)
        if d < best[0]:
            best = (d, "series lower parameter")
    if s.kind == BILATERAL:
        back_stop = None if term.below is None else term.below + 1
        for a in s.upper:
            d = _nearest(a, 1 / s.q, 1, back_stop)
            if d < best[0]:
                best = (d, "bilateral upper parameter")
    if isinstance(s, VWPSpec):
        d = abs(1 - complex(s.sigma))
        if d < best[0]:
            best = (d, "special parameter")
    return best


def _is_positive_power(b: Any, q: Any, tower: Any) -> bool:
    from qbil.series import power_index

    m = power_index(b, q, tower, sign=+1)
    return m is not None and m >= 1


def pole_distance(terms: Sequence[Term], q: Any, tower: Any) -> tuple[float, str]:
    best = (1.0, "")
    for t in terms:
        d = term_pole_distance(t, q, tower)
        if d[0] < best[0]:
            best = d
    return best


def guard(terms: Sequence[Term], q: Any, tower: Any, radius: float = DEGENERATE_RADIUS) -> None:
    d, label = pole_distance(terms, q, tower)
    if d < radius:
        raise DegeneratePoint(f"{label} within {d:.2e} of a pole")


def all_finite(terms: Sequence[Term], tower: Any) -> bool:
    """True when every series in ``terms`` is a finite sum."""
    for t in terms:
        s = t.series
        if s is None:
            continue
        if isinstance(s, ShiftedSum):
            if s.stop is None:
                return False
            continue
        term = detect_termination(s, tower)
        if term.above is None:
            return False
        if s.kind == BILATERAL and term.below is None:
            return False
    return True


TermBuilder = Callable[..., list]
